#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/graph.hpp"
#include "locality_lab/model.hpp"
#include "locality_lab/rng.hpp"

namespace locality_lab {

/// Estimate p(target = target_value | observed = observed_value).
struct Query {
  VariableId observed;
  Bit observed_value = 0;
  VariableId target;
  Bit target_value = 1;

  void validate() const;
  friend bool operator==(const Query&, const Query&) = default;
};

/// Intermediate variables in the order they are generated.
using ScaffoldPlan = std::vector<VariableId>;

/// Records generated between the observed variable and the target, plus the
/// model's final probability for target = target_value.
struct Trace {
  Assignment steps;
  double terminal = 0.0;
};

struct Estimate {
  double value = 0.0;
  std::vector<Trace> traces;
  std::size_t overflowed = 0;  // free generation repetitions discarded
};

enum class EstimatorKind { direct, scaffolded, negative_scaffolded, free_generation };

std::string_view to_string(EstimatorKind kind) noexcept;
EstimatorKind parse_estimator(std::string_view text);

inline constexpr std::size_t kDefaultSamples = 10;

/// q(target | observed) read straight off the model.
double direct(const SequenceModel& model, const Query& query);

/// `vars` ordered by undirected distance from `from`, ties by ascending id.
ScaffoldPlan order_by_distance(const Dag& dag, VariableId from, std::vector<VariableId> vars);

/// Minimum d-separating set between observed and target, distance-ordered.
/// Throws adjacent_pair when the two share an edge.
ScaffoldPlan build_scaffold(const Dag& dag, const Query& query);

/// Monte-Carlo marginalization over the plan: each of M repetitions samples
/// the plan variables one by one from the model, then reads the target.
Estimate scaffolded(const SequenceModel& model, const Query& query, std::span<const VariableId> plan,
                    std::size_t m_samples, Rng& rng);

/// Uniform subset of |plan| variables outside plan, observed and target,
/// ascending. Throws insufficient_variables when too few remain.
ScaffoldPlan negative_scaffold(const Dag& dag, std::span<const VariableId> plan, const Query& query,
                               Rng& rng);

/// The model picks intermediate variables itself until it names the target.
/// Repetitions that generate more than max_steps variables are discarded;
/// estimation_failed when every repetition is discarded.
Estimate free_generation(const SequenceModel& model, const Query& query, std::size_t m_samples,
                         std::size_t max_steps, Rng& rng);

/// Plan members that never co-occurred in training with their predecessor
/// (the observed variable for the first), the observed variable or the
/// target. One message per offending member.
std::vector<std::string> cooccurrence_warnings(
    std::span<const VariableId> plan, const Query& query,
    const std::function<std::size_t(VariableId, VariableId)>& cooccurrence);

}  // namespace locality_lab
