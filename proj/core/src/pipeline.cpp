#include "locality_lab/pipeline.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"
#include "locality_lab/net_io.hpp"
#include "locality_lab/parallel.hpp"

namespace locality_lab {

namespace {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

constexpr std::string_view kSeparator = "###";
constexpr std::string_view kTargetPrefix = "target: ";

[[noreturn]] void malformed(std::size_t line_no, std::string_view line, std::string_view why) {
  throw Error(Errc::malformed_line,
              "line " + std::to_string(line_no) + " '" + std::string(line) + "': " + std::string(why));
}

Observation parse_record(std::string_view line, std::size_t line_no) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) malformed(line_no, line, "expected <name>=<bit>");
  const auto var = try_parse_variable(line.substr(0, eq));
  if (!var) malformed(line_no, line, "bad variable name");
  const auto value = line.substr(eq + 1);
  if (value != "0" && value != "1") malformed(line_no, line, "value must be 0 or 1");
  return {*var, static_cast<Bit>(value[0] - '0')};
}

// Parses the lines of one block; first_line is the 1-based number of "###".
Sample parse_lines(const std::vector<std::string_view>& lines, std::size_t first_line) {
  if (lines.empty() || lines[0] != kSeparator) {
    malformed(first_line, lines.empty() ? "" : lines[0], "expected '###'");
  }
  if (lines.size() < 2 || !lines[1].starts_with(kTargetPrefix)) {
    malformed(first_line + 1, lines.size() < 2 ? "" : lines[1], "expected 'target: <name>'");
  }
  const auto target = try_parse_variable(lines[1].substr(kTargetPrefix.size()));
  if (!target) malformed(first_line + 1, lines[1], "bad target name");
  Sample sample;
  sample.target = *target;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    sample.records.push_back(parse_record(lines[i], first_line + i));
  }
  if (sample.records.empty()) malformed(first_line + 1, lines[1], "sample has no records");
  sample.validate();
  return sample;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

ordered_json pair_json(const HeldOutPair& p) {
  return ordered_json{{"a", format_variable(p.a)}, {"b", format_variable(p.b)}, {"mi", p.mi}};
}

HeldOutPair pair_from(const json& j) {
  return HeldOutPair(parse_variable(j.at("a").get<std::string>()),
                     parse_variable(j.at("b").get<std::string>()), j.value("mi", 0.0));
}

ordered_json spec_json(const ObservationSpec& spec) {
  ordered_json doc;
  doc["mode"] = std::string(to_string(spec.mode));
  doc["n_nodes"] = spec.n_nodes;
  doc["radius"] = ordered_json{{"kind", std::string(to_string(spec.radius.kind))},
                               {"parameter", spec.radius.parameter},
                               {"k_max", spec.radius.k_max}};
  doc["dropout"] = spec.dropout;
  if (spec.mode != ObservationMode::fully_observed) {
    doc["locality_graph"] = ordered_json::parse(dag_to_json(spec.locality_graph));
  }
  ordered_json pairs = ordered_json::array();
  for (const auto& p : spec.held_out) pairs.push_back(pair_json(p));
  doc["held_out"] = std::move(pairs);
  return doc;
}

ObservationSpec spec_from(const json& doc) {
  ObservationSpec spec;
  spec.mode = parse_observation_mode(doc.at("mode").get<std::string>());
  spec.n_nodes = doc.at("n_nodes").get<std::size_t>();
  const json& r = doc.at("radius");
  spec.radius.kind = parse_radius_kind(r.at("kind").get<std::string>());
  spec.radius.parameter = r.at("parameter").get<double>();
  spec.radius.k_max = r.value("k_max", std::size_t{1});
  spec.dropout = doc.at("dropout").get<double>();
  if (doc.contains("locality_graph")) {
    spec.locality_graph = dag_from_json(doc.at("locality_graph").dump());
  }
  for (const auto& p : doc.at("held_out")) spec.held_out.push_back(pair_from(p));
  spec.validate();
  return spec;
}

template <typename Fn>
auto with_json_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

}  // namespace

void Sample::validate() const {
  if (records.empty()) throw Error(Errc::invalid_argument, "sample has no records");
  if (records.back().var != target) {
    throw Error(Errc::target_mismatch, "target " + format_variable(target) +
                                           " but last record is " +
                                           format_variable(records.back().var));
  }
  std::vector<VariableId> vars;
  vars.reserve(records.size());
  for (const auto& r : records) vars.push_back(r.var);
  std::sort(vars.begin(), vars.end());
  if (std::adjacent_find(vars.begin(), vars.end()) != vars.end()) {
    throw Error(Errc::invalid_argument, "variable repeated within a sample");
  }
}

void append_serialized(std::string& out, const Sample& sample) {
  out += kSeparator;
  out += '\n';
  out += kTargetPrefix;
  out += format_variable(sample.target);
  out += '\n';
  for (const auto& r : sample.records) {
    out += format_variable(r.var);
    out += '=';
    out += static_cast<char>('0' + r.value);
    out += '\n';
  }
}

std::string serialize_sample(const Sample& sample) {
  std::string out;
  append_serialized(out, sample);
  return out;
}

Sample parse_sample(std::string_view block) {
  return parse_lines(split_lines(block), 1);
}

std::vector<Sample> parse_corpus(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<Sample> out;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (lines[i] != kSeparator) malformed(i + 1, lines[i], "expected '###'");
    std::size_t j = i + 1;
    while (j < lines.size() && lines[j] != kSeparator) ++j;
    std::vector<std::string_view> block(lines.begin() + static_cast<std::ptrdiff_t>(i),
                                        lines.begin() + static_cast<std::ptrdiff_t>(j));
    out.push_back(parse_lines(block, i + 1));
    i = j;
  }
  return out;
}

std::optional<Sample> CorpusReader::next() {
  std::vector<std::string> lines;
  std::string line;
  if (have_pending_) {
    lines.push_back(std::move(pending_));
    have_pending_ = false;
  } else {
    if (!std::getline(in_, line)) return std::nullopt;
    ++line_no_;
    lines.push_back(line);
  }
  const std::size_t first = line_no_;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line == kSeparator) {
      pending_ = line;
      have_pending_ = true;
      break;
    }
    lines.push_back(line);
  }
  std::vector<std::string_view> views(lines.begin(), lines.end());
  Sample sample = parse_lines(views, first);
  for (const auto& l : lines) characters_ += l.size() + 1;
  return sample;
}

Sample make_sample(const World& world, std::span<const VariableId> vars, Rng& rng) {
  if (vars.empty()) throw Error(Errc::invalid_argument, "cannot build a sample from no variables");
  Sample sample;
  sample.records.reserve(vars.size());
  for (VariableId v : vars) sample.records.push_back({v, world.at(v.index)});
  rng.shuffle(std::span<Observation>(sample.records));
  sample.target = sample.records.back().var;
  return sample;
}

Sample generate_sample(const BayesNet& net, const ObservationSpec& spec, Rng& rng,
                       std::size_t min_sample_size) {
  if (spec.n_nodes != net.size()) {
    throw Error(Errc::invalid_argument, "observation spec and net disagree on node count");
  }
  const std::size_t floor = std::max<std::size_t>(min_sample_size, 1);
  for (std::size_t attempt = 0; attempt < kMaxSelectionAttempts; ++attempt) {
    auto vars = select_variables(spec, rng);
    if (vars.size() < floor) continue;
    const World world = ancestral_sample(net, rng);
    return make_sample(world, vars, rng);
  }
  throw Error(Errc::generation_stuck, "no selection reached " + std::to_string(floor) +
                                          " variables after " +
                                          std::to_string(kMaxSelectionAttempts) + " attempts");
}

void generate_corpus(const BayesNet& net, const ObservationSpec& spec, const CorpusOptions& options,
                     const std::function<void(std::size_t, const Sample&)>& sink) {
  spec.validate();
  if (spec.n_nodes != net.size()) {
    throw Error(Errc::invalid_argument, "observation spec and net disagree on node count");
  }
  const std::size_t workers = resolve_workers(options.workers);
  const std::size_t chunk = std::max<std::size_t>(1024, 256 * workers);
  std::vector<Sample> slots;
  for (std::size_t begin = options.start_index; begin < options.n_samples; begin += chunk) {
    const std::size_t count = std::min(chunk, options.n_samples - begin);
    slots.assign(count, Sample{});
    parallel_for(count, workers, [&](std::size_t k) {
      Rng rng(derive_seed(options.seed, begin + k));
      slots[k] = generate_sample(net, spec, rng, options.min_sample_size);
    });
    for (std::size_t k = 0; k < count; ++k) sink(begin + k, slots[k]);
  }
}

std::vector<Sample> generate_corpus(const BayesNet& net, const ObservationSpec& spec,
                                    std::size_t n_samples, std::uint64_t seed,
                                    std::size_t workers) {
  std::vector<Sample> out;
  out.reserve(n_samples);
  CorpusOptions options;
  options.n_samples = n_samples;
  options.seed = seed;
  options.workers = workers;
  generate_corpus(net, spec, options, [&](std::size_t, const Sample& s) { out.push_back(s); });
  return out;
}

std::vector<HeldOutPair> rank_non_adjacent_pairs(const BayesNet& net) {
  const Dag& dag = net.dag();
  std::vector<HeldOutPair> pairs;
  for (std::uint32_t a = 0; a < net.size(); ++a) {
    for (std::uint32_t b = a + 1; b < net.size(); ++b) {
      const VariableId va{a}, vb{b};
      if (dag.adjacent(va, vb)) continue;
      // Marginally d-separated pairs are independent; skip the inference.
      const double mi = d_separated(dag, va, vb, {}) ? 0.0 : mutual_information(net, va, vb);
      pairs.emplace_back(va, vb, mi);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const HeldOutPair& l, const HeldOutPair& r) { return l.mi > r.mi; });
  return pairs;
}

SelectionResult select_nets_and_pairs(const NetParams& net_params, const SelectionParams& params,
                                      std::uint64_t seed, std::size_t workers) {
  if (params.n_candidates == 0 || params.n_selected == 0) {
    throw Error(Errc::invalid_argument, "candidate and selected counts must be positive");
  }
  if (params.n_holdout > params.n_top_pairs) {
    throw Error(Errc::invalid_argument, "n_holdout must not exceed n_top_pairs");
  }
  if (params.n_selected > params.n_candidates) {
    throw Error(Errc::invalid_argument, "n_selected must not exceed n_candidates");
  }

  SelectionResult result;
  result.candidates.resize(params.n_candidates);
  parallel_for(params.n_candidates, resolve_workers(workers), [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const Dag dag = generate_dag(net_params.n_nodes, net_params.n_edges, rng);
    CandidateNet cand;
    cand.id = c;
    cand.net = assign_cpts(dag, net_params.beta_alpha, net_params.beta_beta, rng);
    auto ranked = rank_non_adjacent_pairs(cand.net);
    ranked.resize(std::min(ranked.size(), params.n_top_pairs));
    cand.top_pairs = ranked;

    std::vector<std::size_t> idx(ranked.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(std::min(idx.size(), params.n_holdout));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) cand.held_out.push_back(ranked[i]);

    double total = 0.0;
    for (const auto& p : cand.held_out) total += p.mi;
    cand.mean_held_out_mi = cand.held_out.empty() ? 0.0 : total / static_cast<double>(cand.held_out.size());
    result.candidates[c] = std::move(cand);
  });

  SelectionReport& report = result.report;
  report.params = params;
  report.net_params = net_params;
  report.seed = seed;
  std::vector<std::size_t> order(params.n_candidates);
  std::iota(order.begin(), order.end(), 0);
  for (const auto& c : result.candidates) report.mean_held_out_mi.push_back(c.mean_held_out_mi);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return report.mean_held_out_mi[l] > report.mean_held_out_mi[r];
  });
  order.resize(params.n_selected);
  report.chosen = order;
  for (std::size_t id : order) result.selected.push_back(result.candidates[id]);
  return result;
}

std::string selection_report_json(const SelectionResult& result) {
  const SelectionReport& r = result.report;
  ordered_json doc;
  doc["seed"] = r.seed;
  doc["candidate_count"] = r.params.n_candidates;
  doc["top_pair_count"] = r.params.n_top_pairs;
  doc["holdout_count"] = r.params.n_holdout;
  doc["selected_net_count"] = r.params.n_selected;
  doc["net_params"] = ordered_json{{"n_nodes", r.net_params.n_nodes},
                                   {"n_edges", r.net_params.n_edges},
                                   {"beta_alpha", r.net_params.beta_alpha},
                                   {"beta_beta", r.net_params.beta_beta}};
  doc["mean_held_out_mi"] = r.mean_held_out_mi;
  doc["chosen"] = r.chosen;
  ordered_json nets = ordered_json::array();
  for (const auto& c : result.selected) {
    ordered_json pairs = ordered_json::array();
    for (const auto& p : c.held_out) pairs.push_back(pair_json(p));
    nets.push_back(ordered_json{{"id", c.id}, {"mean_held_out_mi", c.mean_held_out_mi},
                                {"held_out", std::move(pairs)}});
  }
  doc["selected"] = std::move(nets);
  return doc.dump(2) + "\n";
}

std::string selection_pairs_csv(const SelectionResult& result) {
  std::string out = "candidate,rank,a,b,mi,held_out\n";
  for (const auto& c : result.candidates) {
    for (std::size_t k = 0; k < c.top_pairs.size(); ++k) {
      const auto& p = c.top_pairs[k];
      const bool held = std::find(c.held_out.begin(), c.held_out.end(), p) != c.held_out.end();
      out += std::to_string(c.id) + "," + std::to_string(k) + "," + format_variable(p.a) + "," +
             format_variable(p.b) + "," + format_double(p.mi) + "," + (held ? "1" : "0") + "\n";
    }
  }
  return out;
}

CorpusStats::CorpusStats(std::size_t nodes)
    : n_nodes(nodes), frequency(nodes, 0), cooccurrence(nodes * nodes, 0) {}

void CorpusStats::add(const Sample& sample) {
  ++samples;
  records += sample.records.size();
  // "###\n" + "target: " + name + "\n" + per record name + "=b\n"
  characters += 4 + kTargetPrefix.size() + format_variable(sample.target).size() + 1;
  for (const auto& r : sample.records) {
    if (r.var.index >= n_nodes) {
      throw Error(Errc::unknown_variable, format_variable(r.var) + " outside the net");
    }
    characters += format_variable(r.var).size() + 3;
    ++frequency[r.var.index];
  }
  for (std::size_t i = 0; i < sample.records.size(); ++i) {
    for (std::size_t j = i + 1; j < sample.records.size(); ++j) {
      const auto a = sample.records[i].var.index;
      const auto b = sample.records[j].var.index;
      ++cooccurrence[a * n_nodes + b];
      ++cooccurrence[b * n_nodes + a];
    }
  }
}

CorpusStats corpus_stats(std::span<const Sample> corpus, std::size_t n_nodes) {
  CorpusStats stats(n_nodes);
  for (const auto& s : corpus) stats.add(s);
  return stats;
}

std::string held_out_to_json(std::span<const HeldOutPair> pairs) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : pairs) arr.push_back(pair_json(p));
  return ordered_json{{"held_out", std::move(arr)}}.dump(2) + "\n";
}

std::vector<HeldOutPair> held_out_from_json(std::string_view text) {
  return with_json_errors([&] {
    const json doc = json::parse(text);
    std::vector<HeldOutPair> out;
    for (const auto& p : doc.at("held_out")) out.push_back(pair_from(p));
    return out;
  });
}

std::string observation_spec_to_json(const ObservationSpec& spec) {
  return spec_json(spec).dump(2) + "\n";
}

ObservationSpec observation_spec_from_json(std::string_view text) {
  return with_json_errors([&] { return spec_from(json::parse(text)); });
}

std::string manifest_to_json(const CorpusManifest& m) {
  ordered_json doc;
  doc["format_version"] = m.format_version;
  doc["net_ref"] = m.net_ref;
  doc["n_samples"] = m.n_samples;
  doc["seed"] = m.seed;
  doc["min_sample_size"] = m.min_sample_size;
  doc["spec"] = spec_json(m.spec);
  return doc.dump(2) + "\n";
}

CorpusManifest manifest_from_json(std::string_view text) {
  return with_json_errors([&] {
    const json doc = json::parse(text);
    CorpusManifest m;
    m.format_version = doc.at("format_version").get<std::string>();
    if (m.format_version != kCorpusFormatVersion) {
      throw Error(Errc::parse_error, "unsupported corpus format " + m.format_version);
    }
    m.net_ref = doc.at("net_ref").get<std::string>();
    m.n_samples = doc.at("n_samples").get<std::size_t>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.min_sample_size = doc.value("min_sample_size", std::size_t{2});
    m.spec = spec_from(doc.at("spec"));
    return m;
  });
}

}  // namespace locality_lab
