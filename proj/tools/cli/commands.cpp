#include "cli/commands.hpp"

#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "locality_lab/error.hpp"
#include "locality_lab/eval.hpp"
#include "locality_lab/hash.hpp"
#include "locality_lab/net_io.hpp"
#include "locality_lab/remote.hpp"

namespace locality_lab::cli {

namespace fs = std::filesystem;

namespace {

using ordered_json = nlohmann::ordered_json;

// Stream id for the wrong-local locality graph, so it differs from any net.
constexpr std::uint64_t kWrongLocalStream = 0x77726f6e675f6c6fULL;

std::string default_pairs_path(const std::string& net_path) {
  fs::path p(net_path);
  return (p.parent_path() / (p.stem().string() + ".pairs.json")).string();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::invalid_argument, what);
}

ObservationSpec build_spec(const RunConfig& config, const BayesNet& net, std::vector<HeldOutPair> pairs,
                           const std::string& locality_net_path) {
  const auto& oc = config.observation;
  if (oc.mode == ObservationMode::fully_observed) {
    ObservationSpec spec;
    spec.mode = oc.mode;
    spec.n_nodes = net.size();
    spec.dropout = oc.dropout;
    spec.held_out = std::move(pairs);
    spec.validate();
    return spec;
  }
  Dag graph = net.dag();
  if (oc.mode == ObservationMode::wrong_local) {
    if (!locality_net_path.empty()) {
      graph = load_net(locality_net_path).dag();
    } else {
      Rng rng(derive_seed(config.seed, kWrongLocalStream));
      graph = generate_dag(net.size(), net.dag().edge_count(), rng);
    }
    require(graph.size() == net.size(), "locality net must have the data net's node count");
  }
  return make_observation_spec(oc.mode, graph, oc.radius, oc.radius_parameter, oc.dropout, std::move(pairs));
}

struct Progress {
  std::size_t samples = 0;
  std::uintmax_t bytes = 0;
};

std::optional<Progress> read_progress(const fs::path& path) {
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    return Progress{doc.at("samples").get<std::size_t>(), doc.at("bytes").get<std::uintmax_t>()};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_progress(const fs::path& path, const Progress& p) {
  write_file(path, ordered_json{{"samples", p.samples}, {"bytes", p.bytes}}.dump() + "\n");
}

std::string records_json(std::span<const EstimateRecord> records) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) {
    auto num = [](double x) { return std::isnan(x) ? ordered_json(nullptr) : ordered_json(x); };
    arr.push_back(ordered_json{{"condition", r.condition},
                               {"net_id", r.net_id},
                               {"estimator", std::string(to_string(r.estimator))},
                               {"observed", format_variable(r.query.observed)},
                               {"observed_value", r.query.observed_value},
                               {"target", format_variable(r.query.target)},
                               {"target_value", r.query.target_value},
                               {"estimate", num(r.estimate)},
                               {"true_conditional", num(r.true_conditional)},
                               {"marginal", num(r.marginal)},
                               {"squared_error_true", num(r.squared_error_true)},
                               {"squared_error_marginal", num(r.squared_error_marginal)},
                               {"plan_size", r.plan_size},
                               {"mean_trace_length", num(r.mean_trace_length)},
                               {"trace_d_separation", num(r.trace_d_separation)},
                               {"m", r.m},
                               {"corpus_tokens", r.corpus_tokens},
                               {"overflowed", r.overflowed},
                               {"error", r.error}});
  }
  return arr.dump(1) + "\n";
}

void print_summary(std::ostream& log, std::span<const SummaryRow> rows) {
  for (const auto& r : rows) {
    log << "  " << r.condition << " " << to_string(r.estimator) << " tokens=" << r.corpus_tokens
        << " M=" << r.m << " n=" << r.n << " errors=" << r.errors << " mse_true=" << r.mse_true.mean
        << " [" << r.mse_true.lo << ", " << r.mse_true.hi << "] mse_marginal=" << r.mse_marginal.mean
        << " d_sep=" << r.d_separation_rate << "\n";
  }
}

std::unique_ptr<SequenceModel> make_local_model(const std::string& backend, const BayesNet& net,
                                                const std::string& corpus_path, const RunConfig& config) {
  if (backend == "oracle") return std::make_unique<OracleModel>(net);
  if (backend == "empirical") {
    require(!corpus_path.empty(), "--corpus is required for the empirical backend");
    std::ifstream in(corpus_path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + corpus_path);
    return std::make_unique<EmpiricalBackoffModel>(
        fit_empirical(in, net.size(), config.empirical.alpha, config.empirical.tau));
  }
  throw Error(Errc::invalid_argument, "backend must be oracle or empirical here, got '" + backend + "'");
}

std::atomic<bool> g_stop{false};

extern "C" void handle_stop_signal(int) { g_stop.store(true); }

}  // namespace

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::invalid_argument:
    case Errc::infeasible_edge_count:
    case Errc::parse_error:
    case Errc::malformed_line:
    case Errc::target_mismatch:
    case Errc::unknown_variable:
    case Errc::adjacent_pair:
    case Errc::insufficient_variables:
      return kValidation;
    default:
      return kRuntime;
  }
}

int cmd_gen(const RunConfig& config, std::ostream& log) {
  validate(config);
  const fs::path out(config.out);
  const auto result = select_nets_and_pairs(config.net, config.selection, config.seed, config.workers);
  for (std::size_t k = 0; k < result.selected.size(); ++k) {
    const auto& cand = result.selected[k];
    const fs::path base = out / "nets" / ("net_" + std::to_string(k));
    save_net(cand.net, base.string() + ".json");
    write_file(base.string() + ".pairs.json", held_out_to_json(cand.held_out));
    log << "net_" << k << ": candidate " << cand.id << ", mean held-out MI " << cand.mean_held_out_mi
        << ", " << cand.held_out.size() << " held-out pairs\n";
  }
  write_file(out / "selection_report.json", selection_report_json(result));
  write_file(out / "selection_pairs.csv", selection_pairs_csv(result));
  write_file(out / "gen.effective_config.json", config_to_json(config));
  log << "wrote " << result.selected.size() << " nets to " << (out / "nets").string() << "\n";
  return kOk;
}

int cmd_corpus(const RunConfig& config, const CorpusArgs& args, std::ostream& log) {
  validate(config);
  require(!args.net_path.empty(), "--net is required");
  const std::string net_text = read_file(args.net_path);
  const BayesNet net = net_from_json(net_text);
  const std::string pairs_path = args.pairs_path.empty() ? default_pairs_path(args.net_path) : args.pairs_path;
  auto pairs = fs::exists(pairs_path) ? held_out_from_json(read_file(pairs_path)) : std::vector<HeldOutPair>{};
  if (!fs::exists(pairs_path)) log << "no held-out pairs file at " << pairs_path << "; none enforced\n";

  CorpusManifest manifest;
  manifest.net_ref = sha256_hex(net_text);
  manifest.spec = build_spec(config, net, std::move(pairs), args.locality_net_path);
  manifest.n_samples = config.corpus.n_samples;
  manifest.seed = config.seed;
  manifest.min_sample_size = config.corpus.min_sample_size;

  const std::string name = args.name.empty()
                               ? fs::path(args.net_path).stem().string() + "_" +
                                     std::string(to_string(config.observation.mode))
                               : args.name;
  const fs::path dir = fs::path(config.out) / "corpora";
  const fs::path corpus_path = dir / (name + ".txt");
  const fs::path manifest_path = dir / (name + ".manifest.json");
  const fs::path progress_path = dir / (name + ".progress.json");
  fs::create_directories(dir);

  Progress progress;
  if (args.resume && fs::exists(manifest_path) && fs::exists(corpus_path)) {
    const CorpusManifest old = manifest_from_json(read_file(manifest_path));
    CorpusManifest probe = old;
    probe.n_samples = manifest.n_samples;
    const auto saved = read_progress(progress_path);
    if (manifest_to_json(probe) == manifest_to_json(manifest) && saved &&
        saved->bytes <= fs::file_size(corpus_path) && saved->samples <= manifest.n_samples) {
      progress = *saved;
      fs::resize_file(corpus_path, progress.bytes);
      log << "resuming " << name << " at sample " << progress.samples << "\n";
    }
  }
  if (progress.samples == 0) std::ofstream(corpus_path, std::ios::binary | std::ios::trunc);
  write_file(manifest_path, manifest_to_json(manifest));
  write_progress(progress_path, progress);

  std::ofstream out(corpus_path, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::io_error, "cannot write " + corpus_path.string());
  std::string buffer;
  const std::size_t total = manifest.n_samples;
  const std::size_t step = std::max<std::size_t>(1, total / 10);
  auto flush = [&](std::size_t done) {
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    out.flush();
    if (!out) throw Error(Errc::io_error, "short write to " + corpus_path.string());
    progress.bytes += buffer.size();
    progress.samples = done;
    buffer.clear();
    write_progress(progress_path, progress);
  };
  CorpusOptions options;
  options.n_samples = total;
  options.seed = manifest.seed;
  options.start_index = progress.samples;
  options.workers = config.workers;
  options.min_sample_size = manifest.min_sample_size;
  generate_corpus(net, manifest.spec, options, [&](std::size_t index, const Sample& sample) {
    append_serialized(buffer, sample);
    const std::size_t done = index + 1;
    if (done % 4096 == 0 || done == total) flush(done);
    if (done % step == 0 || done == total) log << "  " << name << ": " << done << "/" << total << "\n";
  });
  write_file(dir / (name + ".effective_config.json"), config_to_json(config));
  log << "wrote " << corpus_path.string() << " (" << progress.bytes << " characters)\n";
  return kOk;
}

int cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& log) {
  validate(config);
  require(!args.net_path.empty(), "--net is required");
  require(args.format == "csv" || args.format == "json", "--format must be csv or json");
  const BayesNet net = load_net(args.net_path);
  const std::string pairs_path = args.pairs_path.empty() ? default_pairs_path(args.net_path) : args.pairs_path;
  const auto pairs = held_out_from_json(read_file(pairs_path));
  const std::string& backend = config.eval.backend;

  std::string condition = args.condition;
  if (condition.empty() && !args.corpus_path.empty()) {
    const fs::path manifest_path =
        fs::path(args.corpus_path).parent_path() / (fs::path(args.corpus_path).stem().string() + ".manifest.json");
    if (fs::exists(manifest_path)) {
      condition = std::string(to_string(manifest_from_json(read_file(manifest_path)).spec.mode));
    }
  }
  if (condition.empty()) condition = backend.starts_with("remote:") ? "remote" : backend;
  const std::string name = args.name.empty() ? fs::path(args.net_path).stem().string() + "_" + condition : args.name;
  const fs::path dir = fs::path(config.out) / "eval" / name;

  EvalOptions options;
  options.condition = condition;
  options.net_id = args.net_id;
  options.estimators = config.eval.estimators;
  options.m_samples = config.eval.m_samples;
  options.max_steps = config.eval.max_steps;
  options.seed = config.seed;
  options.workers = config.workers;

  std::vector<EstimateRecord> records;
  std::vector<SummaryRow> rows;
  std::vector<std::string> warnings;
  std::vector<SkippedQuery> skipped;
  std::shared_ptr<RequestLog> request_log;
  std::unique_ptr<SequenceModel> model;

  const QueryBattery battery = build_battery(net, pairs);
  skipped = battery.skipped;

  if (backend == "empirical" && !config.eval.budget_tokens.empty()) {
    require(!args.corpus_path.empty(), "--corpus is required for the empirical backend");
    const auto corpus = parse_corpus(read_file(args.corpus_path));
    rows = learning_curve(corpus, config.eval.budget_tokens, net, pairs, config.empirical.alpha,
                          config.empirical.tau, options, &records);
  } else {
    if (backend.starts_with("remote:")) {
      const auto timeout = std::chrono::milliseconds(static_cast<long>(config.eval.timeout_seconds * 1000));
      auto factory = tcp_factory(backend, timeout);
      factory();  // fail fast when nothing is listening
      request_log = std::make_shared<RequestLog>();
      model = std::make_unique<RemoteModel>(factory, net.size(), request_log);
    } else {
      model = make_local_model(backend, net, args.corpus_path, config);
    }
    if (auto* emp = dynamic_cast<EmpiricalBackoffModel*>(model.get())) {
      options.cooccurrence = [emp](VariableId a, VariableId b) { return emp->pair_count(a, b); };
      std::ifstream in(args.corpus_path, std::ios::binary);
      options.corpus_tokens = static_cast<std::size_t>(fs::file_size(args.corpus_path));
    }
    auto result = evaluate(*model, net, battery, options);
    records = std::move(result.records);
    warnings = std::move(result.warnings);
    rows = summarize(records, config.seed, config.eval.bootstrap_resamples);
  }

  if (!config.eval.sample_counts.empty()) {
    require(model != nullptr, "sample_counts cannot be combined with budget_tokens");
    std::vector<EstimateRecord> sweep_records;
    auto sweep = sample_count_sweep(*model, net, pairs, config.eval.sample_counts, options, &sweep_records);
    write_file(dir / "sweep_records.csv", records_csv(sweep_records));
    write_file(dir / "sweep_summary.json", summary_json(sweep));
    write_file(dir / "sweep_plot.csv", plot_csv(sweep));
  }

  if (args.format == "csv") {
    write_file(dir / "records.csv", records_csv(records));
  } else {
    write_file(dir / "records.json", records_json(records));
  }
  write_file(dir / "summary.json", summary_json(rows));
  write_file(dir / "plot.csv", plot_csv(rows));
  write_file(dir / "effective_config.json", config_to_json(config));
  std::string skipped_csv = "observed,observed_value,target,target_value,reason\n";
  for (const auto& s : skipped) {
    skipped_csv += format_variable(s.query.observed) + "," + std::to_string(s.query.observed_value) + "," +
                   format_variable(s.query.target) + "," + std::to_string(s.query.target_value) + "," +
                   s.reason + "\n";
  }
  write_file(dir / "skipped.csv", skipped_csv);
  if (!warnings.empty()) {
    std::string text;
    for (const auto& w : warnings) text += w + "\n";
    write_file(dir / "warnings.txt", text);
    log << warnings.size() << " scaffold co-occurrence warnings (see warnings.txt)\n";
  }
  if (request_log) write_file(dir / "requests.ndjson", request_log->text());

  log << "evaluated " << battery.queries.size() << " queries (" << skipped.size() << " skipped) -> "
      << dir.string() << "\n";
  print_summary(log, rows);

  for (const auto& r : records) {
    if (r.error == to_string(Errc::remote_unavailable) || r.error == to_string(Errc::protocol_error)) {
      log << "fatal estimator error: " << r.error << "\n";
      return kRuntime;
    }
  }
  return kOk;
}

int cmd_theory(const RunConfig& config, std::ostream& out, std::ostream& log) {
  validate(config);
  const auto& tc = config.theory;
  const fs::path dir = fs::path(config.out) / "theory";
  std::string gap_csv =
      "chain,chain_seed,formulation,i,j,y_i,y_j,direct_bias2,scaffolded_bias2,ratio,conditional_weight,status\n";
  std::string kl_csv = "chain,chain_seed,edge,value,kl_minimizer,kl_marginal,holds\n";
  struct Tally {
    std::size_t holds = 0, violated = 0, vacuous = 0, assumption_violated = 0;
    double max_ratio = 0.0;
  };
  std::vector<Tally> tallies(tc.formulations.size());
  std::size_t kl_rows = 0, kl_failed = 0;

  for (std::size_t c = 0; c < tc.n_chains; ++c) {
    const std::uint64_t chain_seed = derive_seed(config.seed, c);
    Rng rng(chain_seed);
    const ChainModel chain = random_chain(tc.n, tc.arity, rng, tc.doubly_stochastic);
    const std::string prefix = std::to_string(c) + "," + std::to_string(chain_seed) + ",";
    for (std::size_t f = 0; f < tc.formulations.size(); ++f) {
      const Formulation form = tc.formulations[f];
      GapReport report;
      try {
        report = gap_check(chain, form, tc.uniform_weight);
      } catch (const Error& e) {
        if (e.code() != Errc::assumption_violated) throw;
        ++tallies[f].assumption_violated;
        continue;
      }
      tallies[f].holds += report.holds;
      tallies[f].violated += report.violated;
      tallies[f].vacuous += report.vacuous;
      for (const auto& row : report.rows) {
        if (row.status != GapStatus::vacuous) tallies[f].max_ratio = std::max(tallies[f].max_ratio, row.ratio);
        gap_csv += prefix + std::string(to_string(form)) + "," + std::to_string(row.i) + "," +
                   std::to_string(row.j) + "," + std::to_string(row.y_i) + "," + std::to_string(row.y_j) + "," +
                   format_double(row.direct_bias2) + "," + format_double(row.scaffolded_bias2) + "," +
                   (std::isnan(row.ratio) ? "" : format_double(row.ratio)) + "," +
                   format_double(row.conditional_weight) + "," + std::string(to_string(row.status)) + "\n";
      }
    }
    for (const auto& row : kl_gap_check(chain)) {
      ++kl_rows;
      if (!row.holds) ++kl_failed;
      kl_csv += prefix + std::to_string(row.edge) + "," + std::to_string(row.value) + "," +
                format_double(row.kl_minimizer) + "," + format_double(row.kl_marginal) + "," +
                (row.holds ? "1" : "0") + "\n";
    }
  }

  // Three-variable chain: the scaffolded expectation decomposes as
  // 3/4 p(Y_2) + 1/4 p(Y_2 | Y_0) under the half-half mixture.
  Rng rng3(derive_seed(config.seed, tc.n_chains));
  const ChainModel chain3 = random_chain(3, tc.arity, rng3, false);
  const RiskMinimizer q3 = risk_minimizer(chain3, Formulation::marginal_mixture);
  const Distribution marg = chain_marginal(chain3, 2);
  out << "marginal_mixture 3-chain check (y0 -> y2):\n";
  for (std::size_t y0 = 0; y0 < tc.arity; ++y0) {
    const Distribution cond = chain_conditional(chain3, 2, 0, y0);
    const Distribution exp = scaffolded_expectation(q3, 2, 0, y0);
    for (std::size_t y2 = 0; y2 < tc.arity; ++y2) {
      out << "  y0=" << y0 << " y2=" << y2 << ": E=" << format_double(exp[y2])
          << "  3/4*p(Y2)+1/4*p(Y2|Y0)=" << format_double(0.75 * marg[y2] + 0.25 * cond[y2]) << "\n";
    }
  }

  ordered_json summary;
  summary["n_chains"] = tc.n_chains;
  summary["n"] = tc.n;
  summary["arity"] = tc.arity;
  summary["doubly_stochastic"] = tc.doubly_stochastic;
  summary["uniform_weight"] = tc.uniform_weight;
  bool violated = false;
  for (std::size_t f = 0; f < tc.formulations.size(); ++f) {
    const auto& t = tallies[f];
    violated = violated || t.violated > 0;
    ordered_json entry{{"holds", t.holds},
                       {"violated", t.violated},
                       {"vacuous", t.vacuous},
                       {"assumption_violated", t.assumption_violated},
                       {"max_ratio", t.max_ratio}};
    if (tc.formulations[f] == Formulation::uniform_mixture) {
      // Constant under a uniform marginal: lambda = w / (w + n).
      entry["lambda_uniform_marginal"] = tc.uniform_weight / (tc.uniform_weight + static_cast<double>(tc.n));
    } else {
      entry["lambda"] = 0.5;
    }
    summary["gap"][std::string(to_string(tc.formulations[f]))] = entry;
    out << to_string(tc.formulations[f]) << ": " << t.holds << " hold, " << t.violated << " violated, "
        << t.vacuous << " vacuous, " << t.assumption_violated << " chains outside assumptions\n";
  }
  summary["kl"] = ordered_json{{"rows", kl_rows}, {"failed", kl_failed}};
  out << "kl corollary: " << kl_rows - kl_failed << "/" << kl_rows << " edge-values hold\n";

  write_file(dir / "gap.csv", gap_csv);
  write_file(dir / "kl.csv", kl_csv);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "effective_config.json", config_to_json(config));
  log << "wrote " << dir.string() << "\n";
  return violated || kl_failed ? kViolation : kOk;
}

int cmd_serve(const RunConfig& config, const ServeArgs& args, std::ostream& log) {
  require(!args.net_path.empty(), "--net is required");
  const BayesNet net = load_net(args.net_path);
  const auto model = make_local_model(args.backend, net, args.corpus_path, config);
  if (args.stdio) {
    serve_stream(*model, std::cin, std::cout);
    return kOk;
  }
  const auto colon = args.listen.rfind(':');
  require(colon != std::string::npos, "--listen must be host:port");
  const std::string host = args.listen.substr(0, colon);
  const int port = std::stoi(args.listen.substr(colon + 1));
  require(port >= 0 && port <= 65535, "port out of range");
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  serve_tcp(*model, host, static_cast<std::uint16_t>(port), g_stop, [&](std::uint16_t bound) {
    log << "serving " << model->name() << " model on " << host << ":" << bound << "\n" << std::flush;
  });
  return kOk;
}

}  // namespace locality_lab::cli
