#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "locality_lab/graph.hpp"

namespace locality_lab {

/// Nonnegative table over binary variables. Entry `config` corresponds to
/// bit k of config being the value of scope[k]; scope is ascending. The
/// represented values are table[i] * exp(log_scale); log_scale absorbs
/// renormalization when entries approach underflow.
struct Factor {
  std::vector<VariableId> scope;
  std::vector<double> table;
  double log_scale = 0.0;

  /// Unscaled table entry for the sub-assignment of scope found in `values`
  /// (variables not in scope are ignored; every scope variable must appear).
  double at(const Assignment& values) const;
  /// Table sum times exp(log_scale).
  double total() const;
  /// Copy whose table sums to one and log_scale is zero.
  Factor normalized() const;
};

Factor multiply(const Factor& a, const Factor& b);
Factor sum_out(const Factor& f, VariableId var);

enum class EliminationOrder { min_fill, ascending };

/// Variable elimination over the ancestral closure of query and evidence.
/// Returns a factor over `query` (ascending) proportional to
/// p(query, evidence). Throws zero_probability_evidence when
/// p(evidence) < 1e-300.
Factor eliminate(const BayesNet& net, std::span<const VariableId> query,
                 const Assignment& evidence,
                 EliminationOrder order = EliminationOrder::min_fill);

/// p(target = value | evidence).
double conditional(const BayesNet& net, VariableId target, Bit value, const Assignment& evidence);
/// p(var = 1).
double marginal(const BayesNet& net, VariableId var);
/// Normalized 2x2 joint over {a, b} (scope ascending).
Factor pairwise_joint(const BayesNet& net, VariableId a, VariableId b);
/// Mutual information in nats; 0 ln 0 := 0.
double mutual_information(const BayesNet& net, VariableId a, VariableId b);
double mutual_information(const Factor& pair_joint);

inline constexpr std::size_t kMaxEnumerationNodes = 20;
/// Full 2^n joint from the factorization (test oracle); n <= 20.
Factor brute_force_joint(const BayesNet& net);

// --- Graph separation ------------------------------------------------------

/// Mask of nodes that are ancestors of (or equal to) any seed.
std::vector<char> ancestral_closure(const Dag& dag, std::span<const VariableId> seeds);

/// Nodes connected to `source` by a trail that is active given `given`
/// (Bayes-ball reachability). Members of `given` are never reported.
std::vector<char> active_reachable(const Dag& dag, VariableId source,
                                   std::span<const VariableId> given);

/// True iff every trail between a and b is blocked by `given`.
bool d_separated(const Dag& dag, VariableId a, VariableId b, std::span<const VariableId> given);

/// Minimum-cardinality d-separating set for non-adjacent a, b: a minimum
/// vertex cut between a and b in the moral graph of their ancestral closure,
/// found by unit-capacity max-flow. Among minimum cuts, the one whose
/// ascending id sequence is lexicographically smallest is returned.
std::vector<VariableId> minimal_d_separator(const Dag& dag, VariableId a, VariableId b);

}  // namespace locality_lab
