#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/error.hpp"
#include "locality_lab/estimators.hpp"
#include "locality_lab/eval.hpp"
#include "locality_lab/obsdist.hpp"
#include "locality_lab/pipeline.hpp"
#include "locality_lab/theory.hpp"

namespace locality_lab::cli {

struct ObservationConfig {
  ObservationMode mode = ObservationMode::local;
  RadiusKind radius = RadiusKind::geometric;
  double radius_parameter = 0.5;
  double dropout = 0.2;
};

struct CorpusConfig {
  std::size_t n_samples = 100'000;
  std::size_t min_sample_size = 2;
};

struct EvalConfig {
  std::vector<EstimatorKind> estimators{EstimatorKind::direct, EstimatorKind::scaffolded,
                                        EstimatorKind::negative_scaffolded,
                                        EstimatorKind::free_generation};
  std::size_t m_samples = kDefaultSamples;
  std::size_t max_steps = 0;  // 0 -> 2N
  std::string backend = "empirical";
  std::vector<std::size_t> budget_tokens;  // learning-curve budgets (characters)
  std::vector<std::size_t> sample_counts;  // optional M sweep
  std::size_t bootstrap_resamples = kBootstrapResamples;
  double timeout_seconds = 30.0;
};

struct EmpiricalConfig {
  double alpha = 1.0;
  double tau = 50.0;
};

struct TheoryConfig {
  std::size_t n = 10;
  std::size_t arity = 2;
  std::size_t n_chains = 200;
  std::vector<Formulation> formulations{Formulation::marginal_mixture, Formulation::uniform_mixture};
  double uniform_weight = 1.0;
  bool doubly_stochastic = true;
};

/// Everything a run depends on. Written back out as effective_config.json.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0 -> available parallelism
  std::string out = "out";
  NetParams net;
  SelectionParams selection;
  ObservationConfig observation;
  CorpusConfig corpus;
  EvalConfig eval;
  EmpiricalConfig empirical;
  TheoryConfig theory;
};

/// "desk": 20 nodes / 20 edges, 10 candidates, 10 top pairs, 5 held out,
/// 2 nets, 1e5 samples. "paper": 100 / 100, 100 / 50 / 25 / 10, 1e6 samples.
RunConfig preset_config(std::string_view name);

/// Overlays the fields present in `json_text` onto `base`. Unknown keys and
/// wrong types are rejected with the offending field path in the message.
RunConfig merge_config(RunConfig base, std::string_view json_text);

/// Field-level checks; throws Error(invalid_argument) naming the field.
void validate(const RunConfig& config);

std::string config_to_json(const RunConfig& config);

}  // namespace locality_lab::cli
