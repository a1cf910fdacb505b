#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/graph.hpp"
#include "locality_lab/rng.hpp"

namespace locality_lab {

enum class RadiusKind { geometric, zipf };

/// Distribution of the neighbourhood radius k >= 1.
///   geometric: P(k) = (1 - p)^(k - 1) p, p in (0, 1]
///   zipf:      P(k) proportional to k^-s on {1, ..., k_max}, s > 1
struct RadiusDistribution {
  RadiusKind kind = RadiusKind::geometric;
  double parameter = 0.5;
  std::size_t k_max = 1;  // zipf truncation; ignored for geometric

  static RadiusDistribution geometric(double p);
  /// k_max is normally the locality graph's undirected diameter.
  static RadiusDistribution zipf(double s, std::size_t k_max);

  void validate() const;
};

std::string_view to_string(RadiusKind kind) noexcept;
RadiusKind parse_radius_kind(std::string_view text);

std::size_t sample_radius(const RadiusDistribution& dist, Rng& rng);

/// Unordered pair of variables that must never be shown together.
struct HeldOutPair {
  VariableId a;  // a < b
  VariableId b;
  double mi = 0.0;

  HeldOutPair() = default;
  HeldOutPair(VariableId x, VariableId y, double mutual_info = 0.0);

  bool contains(VariableId v) const noexcept { return v == a || v == b; }
  friend bool operator==(const HeldOutPair& l, const HeldOutPair& r) {
    return l.a == r.a && l.b == r.b;
  }
};

enum class ObservationMode { local, wrong_local, fully_observed };

std::string_view to_string(ObservationMode mode) noexcept;
ObservationMode parse_observation_mode(std::string_view text);

/// Which variables appear together in a training sample.
struct ObservationSpec {
  ObservationMode mode = ObservationMode::local;
  Dag locality_graph;  // data net's DAG (local) or another net's (wrong_local)
  std::size_t n_nodes = 0;
  RadiusDistribution radius;
  double dropout = 0.2;
  std::vector<HeldOutPair> held_out;

  /// Checks dropout in [0, 1), radius parameters, node counts and pairs.
  void validate() const;
};

/// Builds a spec, setting zipf k_max to the locality graph's diameter.
ObservationSpec make_observation_spec(ObservationMode mode, const Dag& locality_graph,
                                      RadiusKind radius_kind, double radius_parameter,
                                      double dropout, std::vector<HeldOutPair> held_out);

/// Diagnostics from one selection, for dropout-rate checks.
struct SelectionTrace {
  VariableId center;
  std::size_t radius = 0;
  std::size_t neighbourhood_size = 0;
  std::size_t dropped = 0;
  std::size_t held_out_removed = 0;
};

/// One draw of the observed variable set (ascending). The held-out pass
/// removes exactly one member, by fair coin, of every pair still complete.
std::vector<VariableId> select_variables(const ObservationSpec& spec, Rng& rng,
                                         SelectionTrace* trace = nullptr);

/// Number of sets that contain both members of some held-out pair.
std::size_t verify_exclusion(std::span<const std::vector<VariableId>> samples,
                             std::span<const HeldOutPair> held_out);

}  // namespace locality_lab
