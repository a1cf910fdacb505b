#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "locality_lab/estimators.hpp"
#include "locality_lab/graph.hpp"
#include "locality_lab/model.hpp"
#include "locality_lab/obsdist.hpp"
#include "locality_lab/pipeline.hpp"

namespace locality_lab {

/// (a | b=0), (a | b=1), (b | a=0), (b | a=1), all with target_value = 1.
std::vector<Query> queries_for_pair(const HeldOutPair& pair);

struct PreparedQuery {
  Query query;
  double true_conditional = 0.0;  // p(target = target_value | observed)
  double marginal = 0.0;          // p(target = target_value)
};

struct SkippedQuery {
  Query query;
  std::string reason;
};

struct QueryBattery {
  std::vector<PreparedQuery> queries;
  std::vector<SkippedQuery> skipped;
};

/// Four queries per pair with exact references; queries whose evidence has
/// probability zero are skipped with the error code as reason.
QueryBattery build_battery(const BayesNet& net, std::span<const HeldOutPair> pairs);

struct EstimateRecord {
  std::string condition;
  std::size_t net_id = 0;
  EstimatorKind estimator = EstimatorKind::direct;
  Query query;
  double estimate = 0.0;  // NaN when error is set
  double true_conditional = 0.0;
  double marginal = 0.0;
  double squared_error_true = 0.0;
  double squared_error_marginal = 0.0;
  std::size_t plan_size = 0;
  double mean_trace_length = 0.0;
  /// Fraction of traces whose variables d-separate observed from target.
  double trace_d_separation = 0.0;
  std::size_t m = 0;
  std::size_t corpus_tokens = 0;
  std::size_t overflowed = 0;
  std::string error;  // error code, empty on success
};

struct EvalOptions {
  std::string condition = "default";
  std::size_t net_id = 0;
  std::vector<EstimatorKind> estimators{EstimatorKind::direct, EstimatorKind::scaffolded,
                                        EstimatorKind::negative_scaffolded,
                                        EstimatorKind::free_generation};
  std::size_t m_samples = kDefaultSamples;
  std::size_t max_steps = 0;  // 0 -> 2 * n_nodes
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t corpus_tokens = 0;
  /// When set, scaffold plans are checked against training co-occurrence.
  std::function<std::size_t(VariableId, VariableId)> cooccurrence;
};

struct EvalResult {
  std::vector<EstimateRecord> records;  // ordered by (query, estimator)
  std::vector<SkippedQuery> skipped;
  std::vector<std::string> warnings;
};

/// One record per prepared query and estimator. Query q uses random stream
/// derive_seed(derive_seed(seed, q), estimator), so results do not depend on
/// the worker count or on which other estimators run. Estimator failures are
/// stored in the record; the run continues.
EvalResult evaluate(const SequenceModel& model, const BayesNet& net, const QueryBattery& battery,
                    const EvalOptions& options);
EvalResult evaluate(const SequenceModel& model, const BayesNet& net,
                    std::span<const HeldOutPair> pairs, const EvalOptions& options);

/// Fraction of traces whose variable set d-separates observed from target.
double d_separation_rate(std::span<const Trace> traces, const Dag& dag, const Query& query);

struct ConfidenceInterval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr std::size_t kBootstrapResamples = 10'000;

/// Percentile bootstrap of the mean; lo <= mean <= hi.
ConfidenceInterval bootstrap_mean_ci(std::span<const double> values, std::uint64_t seed,
                                     std::size_t resamples = kBootstrapResamples, double level = 0.95);

struct SummaryRow {
  std::string condition;
  EstimatorKind estimator = EstimatorKind::direct;
  std::size_t corpus_tokens = 0;
  std::size_t m = 0;
  std::size_t n = 0;       // successful records
  std::size_t errors = 0;  // failed records
  ConfidenceInterval mse_true;
  ConfidenceInterval mse_marginal;
  double mean_trace_length = 0.0;
  double d_separation_rate = 0.0;
};

/// Groups records by (condition, estimator, corpus_tokens, m) in first-seen
/// order and bootstraps each group's MSE.
std::vector<SummaryRow> summarize(std::span<const EstimateRecord> records, std::uint64_t seed,
                                  std::size_t resamples = kBootstrapResamples);

std::string records_csv(std::span<const EstimateRecord> records);
std::string summary_json(std::span<const SummaryRow> rows);
/// Long format: condition,estimator,tokens,m,mse,ci_lo,ci_hi
std::string plot_csv(std::span<const SummaryRow> rows);

/// Refit the empirical model on whole-sample corpus prefixes no longer than
/// each character budget and evaluate each. Budgets must ascend.
std::vector<SummaryRow> learning_curve(std::span<const Sample> corpus, std::span<const std::size_t> budgets,
                                       const BayesNet& net, std::span<const HeldOutPair> pairs,
                                       double alpha, double tau, const EvalOptions& options,
                                       std::vector<EstimateRecord>* records = nullptr);

/// One evaluation per sample count M.
std::vector<SummaryRow> sample_count_sweep(const SequenceModel& model, const BayesNet& net,
                                           std::span<const HeldOutPair> pairs,
                                           std::span<const std::size_t> ms, const EvalOptions& options,
                                           std::vector<EstimateRecord>* records = nullptr);

}  // namespace locality_lab
