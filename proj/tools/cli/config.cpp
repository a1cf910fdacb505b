#include "cli/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <nlohmann/json.hpp>

#include "locality_lab/error.hpp"

namespace locality_lab::cli {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw Error(Errc::invalid_argument, path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) field_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      field_error(path.empty() ? key : path + "." + key, "unknown field");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  const std::string where = path.empty() ? key : path + "." + key;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) field_error(where, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      field_error(where, "expected a nonnegative integer");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) field_error(where, "expected a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) field_error(where, "expected a string");
  }
  try {
    dst = v.get<T>();
  } catch (const json::exception& e) {
    field_error(where, e.what());
  }
}

template <typename Parse, typename T>
void read_enum(const json& obj, const std::string& path, const char* key, T& dst, Parse parse) {
  std::string text;
  read(obj, path, key, text);
  if (!obj.contains(key)) return;
  try {
    dst = parse(text);
  } catch (const Error& e) {
    field_error(path + "." + key, e.what());
  }
}

template <typename Parse, typename T>
void read_enum_list(const json& obj, const std::string& path, const char* key, std::vector<T>& dst,
                    Parse parse) {
  std::vector<std::string> texts;
  read(obj, path, key, texts);
  if (!obj.contains(key)) return;
  dst.clear();
  for (const auto& t : texts) {
    try {
      dst.push_back(parse(t));
    } catch (const Error& e) {
      field_error(path + "." + key, e.what());
    }
  }
}

}  // namespace

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.preset = "paper";
    c.net = NetParams{100, 100, 0.2, 0.2};
    c.selection = SelectionParams{100, 50, 25, 10};
    c.corpus.n_samples = 1'000'000;
    return c;
  }
  throw Error(Errc::invalid_argument, "preset: unknown preset '" + std::string(name) + "' (desk, paper)");
}

RunConfig merge_config(RunConfig c, std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("config: ") + e.what());
  }
  check_keys(doc, "", {"preset", "seed", "workers", "out", "net", "selection", "observation", "corpus",
                       "eval", "empirical", "theory"});
  if (doc.contains("preset")) {
    std::string preset;
    read(doc, "", "preset", preset);
    if (preset != c.preset) c = preset_config(preset);
  }
  read(doc, "", "seed", c.seed);
  read(doc, "", "workers", c.workers);
  read(doc, "", "out", c.out);
  if (doc.contains("net")) {
    const json& s = doc["net"];
    check_keys(s, "net", {"n_nodes", "n_edges", "beta_alpha", "beta_beta"});
    read(s, "net", "n_nodes", c.net.n_nodes);
    read(s, "net", "n_edges", c.net.n_edges);
    read(s, "net", "beta_alpha", c.net.beta_alpha);
    read(s, "net", "beta_beta", c.net.beta_beta);
  }
  if (doc.contains("selection")) {
    const json& s = doc["selection"];
    check_keys(s, "selection", {"n_candidates", "n_top_pairs", "n_holdout", "n_selected"});
    read(s, "selection", "n_candidates", c.selection.n_candidates);
    read(s, "selection", "n_top_pairs", c.selection.n_top_pairs);
    read(s, "selection", "n_holdout", c.selection.n_holdout);
    read(s, "selection", "n_selected", c.selection.n_selected);
  }
  if (doc.contains("observation")) {
    const json& s = doc["observation"];
    check_keys(s, "observation", {"mode", "radius", "radius_parameter", "dropout"});
    read_enum(s, "observation", "mode", c.observation.mode, parse_observation_mode);
    read_enum(s, "observation", "radius", c.observation.radius, parse_radius_kind);
    read(s, "observation", "radius_parameter", c.observation.radius_parameter);
    read(s, "observation", "dropout", c.observation.dropout);
  }
  if (doc.contains("corpus")) {
    const json& s = doc["corpus"];
    check_keys(s, "corpus", {"n_samples", "min_sample_size"});
    read(s, "corpus", "n_samples", c.corpus.n_samples);
    read(s, "corpus", "min_sample_size", c.corpus.min_sample_size);
  }
  if (doc.contains("eval")) {
    const json& s = doc["eval"];
    check_keys(s, "eval", {"estimators", "m_samples", "max_steps", "backend", "budget_tokens",
                           "sample_counts", "bootstrap_resamples", "timeout_seconds"});
    read_enum_list(s, "eval", "estimators", c.eval.estimators, parse_estimator);
    read(s, "eval", "m_samples", c.eval.m_samples);
    read(s, "eval", "max_steps", c.eval.max_steps);
    read(s, "eval", "backend", c.eval.backend);
    read(s, "eval", "budget_tokens", c.eval.budget_tokens);
    read(s, "eval", "sample_counts", c.eval.sample_counts);
    read(s, "eval", "bootstrap_resamples", c.eval.bootstrap_resamples);
    read(s, "eval", "timeout_seconds", c.eval.timeout_seconds);
  }
  if (doc.contains("empirical")) {
    const json& s = doc["empirical"];
    check_keys(s, "empirical", {"alpha", "tau"});
    read(s, "empirical", "alpha", c.empirical.alpha);
    read(s, "empirical", "tau", c.empirical.tau);
  }
  if (doc.contains("theory")) {
    const json& s = doc["theory"];
    check_keys(s, "theory", {"n", "arity", "n_chains", "formulations", "uniform_weight", "doubly_stochastic"});
    read(s, "theory", "n", c.theory.n);
    read(s, "theory", "arity", c.theory.arity);
    read(s, "theory", "n_chains", c.theory.n_chains);
    read_enum_list(s, "theory", "formulations", c.theory.formulations, parse_formulation);
    read(s, "theory", "uniform_weight", c.theory.uniform_weight);
    read(s, "theory", "doubly_stochastic", c.theory.doubly_stochastic);
  }
  return c;
}

void validate(const RunConfig& c) {
  auto positive = [](const char* field, std::size_t v) {
    if (v == 0) field_error(field, "must be positive");
  };
  positive("net.n_nodes", c.net.n_nodes);
  if (c.net.n_nodes >= 2 && c.net.n_edges > c.net.n_nodes * (c.net.n_nodes - 1) / 2) {
    field_error("net.n_edges", "exceeds n_nodes*(n_nodes-1)/2");
  }
  if (!(c.net.beta_alpha > 0.0)) field_error("net.beta_alpha", "must be positive");
  if (!(c.net.beta_beta > 0.0)) field_error("net.beta_beta", "must be positive");
  positive("selection.n_candidates", c.selection.n_candidates);
  positive("selection.n_top_pairs", c.selection.n_top_pairs);
  positive("selection.n_holdout", c.selection.n_holdout);
  positive("selection.n_selected", c.selection.n_selected);
  if (c.selection.n_holdout > c.selection.n_top_pairs) field_error("selection.n_holdout", "exceeds n_top_pairs");
  if (c.selection.n_selected > c.selection.n_candidates) {
    field_error("selection.n_selected", "exceeds n_candidates");
  }
  if (!(c.observation.dropout >= 0.0 && c.observation.dropout < 1.0)) {
    field_error("observation.dropout", "must lie in [0, 1)");
  }
  if (c.observation.radius == RadiusKind::geometric &&
      !(c.observation.radius_parameter > 0.0 && c.observation.radius_parameter <= 1.0)) {
    field_error("observation.radius_parameter", "geometric parameter must lie in (0, 1]");
  }
  if (c.observation.radius == RadiusKind::zipf && !(c.observation.radius_parameter > 1.0)) {
    field_error("observation.radius_parameter", "zipf parameter must exceed 1");
  }
  positive("corpus.n_samples", c.corpus.n_samples);
  positive("corpus.min_sample_size", c.corpus.min_sample_size);
  if (c.eval.estimators.empty()) field_error("eval.estimators", "must not be empty");
  positive("eval.m_samples", c.eval.m_samples);
  positive("eval.bootstrap_resamples", c.eval.bootstrap_resamples);
  if (!std::is_sorted(c.eval.budget_tokens.begin(), c.eval.budget_tokens.end())) {
    field_error("eval.budget_tokens", "must ascend");
  }
  for (std::size_t m : c.eval.sample_counts) {
    if (m == 0) field_error("eval.sample_counts", "entries must be positive");
  }
  if (!(c.eval.timeout_seconds > 0.0)) field_error("eval.timeout_seconds", "must be positive");
  const auto& b = c.eval.backend;
  if (b != "oracle" && b != "empirical" && !b.starts_with("remote:")) {
    field_error("eval.backend", "expected oracle, empirical or remote:<host>:<port>");
  }
  if (!(c.empirical.alpha >= 0.0)) field_error("empirical.alpha", "must be nonnegative");
  if (!(c.empirical.tau >= 0.0)) field_error("empirical.tau", "must be nonnegative");
  if (c.theory.n < 3) field_error("theory.n", "must be at least 3");
  if (c.theory.arity < 2) field_error("theory.arity", "must be at least 2");
  positive("theory.n_chains", c.theory.n_chains);
  if (c.theory.formulations.empty()) field_error("theory.formulations", "must not be empty");
  if (!(c.theory.uniform_weight >= 0.0)) field_error("theory.uniform_weight", "must be nonnegative");
  if (c.out.empty()) field_error("out", "must not be empty");
}

std::string config_to_json(const RunConfig& c) {
  ordered_json doc;
  doc["preset"] = c.preset;
  doc["seed"] = c.seed;
  doc["workers"] = c.workers;
  doc["out"] = c.out;
  doc["net"] = ordered_json{{"n_nodes", c.net.n_nodes},
                            {"n_edges", c.net.n_edges},
                            {"beta_alpha", c.net.beta_alpha},
                            {"beta_beta", c.net.beta_beta}};
  doc["selection"] = ordered_json{{"n_candidates", c.selection.n_candidates},
                                  {"n_top_pairs", c.selection.n_top_pairs},
                                  {"n_holdout", c.selection.n_holdout},
                                  {"n_selected", c.selection.n_selected}};
  doc["observation"] = ordered_json{{"mode", std::string(to_string(c.observation.mode))},
                                    {"radius", std::string(to_string(c.observation.radius))},
                                    {"radius_parameter", c.observation.radius_parameter},
                                    {"dropout", c.observation.dropout}};
  doc["corpus"] = ordered_json{{"n_samples", c.corpus.n_samples}, {"min_sample_size", c.corpus.min_sample_size}};
  std::vector<std::string> estimators;
  for (auto e : c.eval.estimators) estimators.emplace_back(to_string(e));
  doc["eval"] = ordered_json{{"estimators", estimators},
                             {"m_samples", c.eval.m_samples},
                             {"max_steps", c.eval.max_steps},
                             {"backend", c.eval.backend},
                             {"budget_tokens", c.eval.budget_tokens},
                             {"sample_counts", c.eval.sample_counts},
                             {"bootstrap_resamples", c.eval.bootstrap_resamples},
                             {"timeout_seconds", c.eval.timeout_seconds}};
  doc["empirical"] = ordered_json{{"alpha", c.empirical.alpha}, {"tau", c.empirical.tau}};
  std::vector<std::string> formulations;
  for (auto f : c.theory.formulations) formulations.emplace_back(to_string(f));
  doc["theory"] = ordered_json{{"n", c.theory.n},
                               {"arity", c.theory.arity},
                               {"n_chains", c.theory.n_chains},
                               {"formulations", formulations},
                               {"uniform_weight", c.theory.uniform_weight},
                               {"doubly_stochastic", c.theory.doubly_stochastic}};
  return doc.dump(2) + "\n";
}

}  // namespace locality_lab::cli
