#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "locality_lab/rng.hpp"

namespace locality_lab {

/// Index of a binary variable; displayed as "X<index>" with no padding.
struct VariableId {
  std::uint32_t index = 0;

  friend auto operator<=>(const VariableId&, const VariableId&) = default;
};

std::string format_variable(VariableId id);
/// Parses "X<digits>" (no sign, no leading zeros except "X0"). Returns
/// nullopt on any other text.
std::optional<VariableId> try_parse_variable(std::string_view text);
/// As try_parse_variable, but throws Error(parse_error).
VariableId parse_variable(std::string_view text);

using Bit = std::uint8_t;

/// One observed (variable, value) pair.
struct Observation {
  VariableId var;
  Bit value = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Partial assignment: the evidence / context side of a query.
using Assignment = std::vector<Observation>;

/// Total assignment indexed by variable index.
using World = std::vector<Bit>;

using Edge = std::pair<VariableId, VariableId>;  // (parent, child)

/// Directed acyclic graph over n nodes. Parent and child lists are kept
/// sorted ascending; add_edge refuses duplicates, self-loops and cycles.
class Dag {
 public:
  Dag() = default;
  explicit Dag(std::size_t n_nodes);

  std::size_t size() const noexcept { return parents_.size(); }
  std::size_t edge_count() const noexcept { return n_edges_; }

  bool contains(VariableId v) const noexcept { return v.index < size(); }
  bool has_edge(VariableId parent, VariableId child) const;
  /// Edge in either direction.
  bool adjacent(VariableId a, VariableId b) const;
  /// True iff a directed path from -> ... -> to exists (from == to counts).
  bool reaches(VariableId from, VariableId to) const;
  /// True iff adding parent -> child would be rejected.
  bool would_create_cycle(VariableId parent, VariableId child) const;

  void add_edge(VariableId parent, VariableId child);

  std::span<const VariableId> parents(VariableId v) const { return parents_[v.index]; }
  std::span<const VariableId> children(VariableId v) const { return children_[v.index]; }

  /// All edges sorted by (parent, child).
  std::vector<Edge> edges() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  std::vector<std::vector<VariableId>> parents_;
  std::vector<std::vector<VariableId>> children_;
  std::size_t n_edges_ = 0;
};

/// Conditional probability table of a binary node. Row `config` holds
/// P(owner = 1 | parents), where bit k of config is the value of parents[k]
/// and parents are sorted by ascending index.
struct Cpt {
  VariableId owner;
  std::vector<VariableId> parents;
  std::vector<double> table;

  double p1(std::uint32_t config) const { return table[config]; }
  std::uint32_t config_of(const World& world) const;

  friend bool operator==(const Cpt&, const Cpt&) = default;
};

/// DAG plus one CPT per node; the data distribution.
class BayesNet {
 public:
  BayesNet() = default;
  /// Validates that each CPT's parents match the DAG and its table has
  /// 2^|parents| entries in [0, 1].
  BayesNet(Dag dag, std::vector<Cpt> cpts);

  const Dag& dag() const noexcept { return dag_; }
  std::size_t size() const noexcept { return dag_.size(); }
  const Cpt& cpt(VariableId v) const { return cpts_[v.index]; }
  const std::vector<Cpt>& cpts() const noexcept { return cpts_; }
  const std::vector<VariableId>& order() const noexcept { return order_; }

  friend bool operator==(const BayesNet& a, const BayesNet& b) {
    return a.dag_ == b.dag_ && a.cpts_ == b.cpts_;
  }

 private:
  Dag dag_;
  std::vector<Cpt> cpts_;
  std::vector<VariableId> order_;
};

/// Rejection-free guard: consecutive rejected candidate edges before
/// generate_dag gives up with generation_stuck.
inline constexpr std::size_t kMaxConsecutiveEdgeRejections = 10'000;

/// Random DAG by repeated random-pair edge insertion, re-drawing any pair
/// that duplicates an edge or would close a cycle.
Dag generate_dag(std::size_t n_nodes, std::size_t n_edges, Rng& rng);

/// Kahn's algorithm; among ready nodes the smallest index goes first.
std::vector<VariableId> topological_order(const Dag& dag);

/// Gamma(shape, 1) via Marsaglia-Tsang, returned as a natural log so that
/// very small shapes do not underflow.
double sample_log_gamma(double shape, Rng& rng);
/// Beta(alpha, beta) as the ratio of two Gamma draws.
double sample_beta(double alpha, double beta, Rng& rng);

/// One Beta(alpha, beta) draw per CPT row, nodes visited in topological order.
BayesNet assign_cpts(const Dag& dag, double alpha, double beta, Rng& rng);

World ancestral_sample(const BayesNet& net, Rng& rng);

/// Direction-ignoring BFS distances from `source` (-1 when unreachable).
std::vector<int> undirected_distances(const Dag& dag, VariableId source);
/// Nodes within undirected distance k of center, ascending.
std::vector<VariableId> undirected_neighborhood(const Dag& dag, VariableId center, std::size_t k);
/// Largest finite undirected distance between any two nodes (0 for edgeless).
std::size_t undirected_diameter(const Dag& dag);

}  // namespace locality_lab
