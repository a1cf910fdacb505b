#include "locality_lab/obsdist.hpp"

#include <algorithm>
#include <cmath>

#include "locality_lab/error.hpp"

namespace locality_lab {

RadiusDistribution RadiusDistribution::geometric(double p) {
  RadiusDistribution d{RadiusKind::geometric, p, 1};
  d.validate();
  return d;
}

RadiusDistribution RadiusDistribution::zipf(double s, std::size_t k_max) {
  RadiusDistribution d{RadiusKind::zipf, s, std::max<std::size_t>(k_max, 1)};
  d.validate();
  return d;
}

void RadiusDistribution::validate() const {
  if (kind == RadiusKind::geometric && !(parameter > 0.0 && parameter <= 1.0)) {
    throw Error(Errc::invalid_argument, "geometric parameter must lie in (0, 1]");
  }
  if (kind == RadiusKind::zipf && !(parameter > 1.0)) {
    throw Error(Errc::invalid_argument, "zipf parameter must exceed 1");
  }
  if (kind == RadiusKind::zipf && k_max < 1) {
    throw Error(Errc::invalid_argument, "zipf k_max must be at least 1");
  }
}

std::string_view to_string(RadiusKind kind) noexcept {
  return kind == RadiusKind::geometric ? "geometric" : "zipf";
}

RadiusKind parse_radius_kind(std::string_view text) {
  if (text == "geometric") return RadiusKind::geometric;
  if (text == "zipf") return RadiusKind::zipf;
  throw Error(Errc::invalid_argument, "unknown radius distribution '" + std::string(text) + "'");
}

std::size_t sample_radius(const RadiusDistribution& dist, Rng& rng) {
  if (dist.kind == RadiusKind::geometric) {
    if (dist.parameter >= 1.0) return 1;
    // Inversion: number of trials up to and including the first success.
    const double u = rng.uniform_open();
    return 1 + static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-dist.parameter)));
  }
  double norm = 0.0;
  for (std::size_t k = 1; k <= dist.k_max; ++k) norm += std::pow(static_cast<double>(k), -dist.parameter);
  double u = rng.uniform() * norm;
  for (std::size_t k = 1; k <= dist.k_max; ++k) {
    u -= std::pow(static_cast<double>(k), -dist.parameter);
    if (u < 0.0) return k;
  }
  return dist.k_max;
}

HeldOutPair::HeldOutPair(VariableId x, VariableId y, double mutual_info)
    : a(std::min(x, y)), b(std::max(x, y)), mi(mutual_info) {
  if (x == y) throw Error(Errc::invalid_argument, "held-out pair needs two distinct variables");
}

std::string_view to_string(ObservationMode mode) noexcept {
  switch (mode) {
    case ObservationMode::local: return "local";
    case ObservationMode::wrong_local: return "wrong_local";
    case ObservationMode::fully_observed: return "fully_observed";
  }
  return "local";
}

ObservationMode parse_observation_mode(std::string_view text) {
  if (text == "local") return ObservationMode::local;
  if (text == "wrong_local") return ObservationMode::wrong_local;
  if (text == "fully_observed") return ObservationMode::fully_observed;
  throw Error(Errc::invalid_argument, "unknown observation mode '" + std::string(text) + "'");
}

void ObservationSpec::validate() const {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::invalid_argument, "dropout must lie in [0, 1)");
  if (n_nodes == 0) throw Error(Errc::invalid_argument, "observation spec needs n_nodes > 0");
  if (mode != ObservationMode::fully_observed) {
    radius.validate();
    if (locality_graph.size() != n_nodes) {
      throw Error(Errc::invalid_argument, "locality graph must have the data net's node count");
    }
  }
  for (const HeldOutPair& p : held_out) {
    if (p.a == p.b || p.b.index >= n_nodes) throw Error(Errc::invalid_argument, "bad held-out pair");
  }
}

ObservationSpec make_observation_spec(ObservationMode mode, const Dag& locality_graph,
                                      RadiusKind radius_kind, double radius_parameter,
                                      double dropout, std::vector<HeldOutPair> held_out) {
  ObservationSpec spec;
  spec.mode = mode;
  spec.locality_graph = locality_graph;
  spec.n_nodes = locality_graph.size();
  spec.radius = radius_kind == RadiusKind::geometric
                    ? RadiusDistribution::geometric(radius_parameter)
                    : RadiusDistribution::zipf(radius_parameter, undirected_diameter(locality_graph));
  spec.dropout = dropout;
  spec.held_out = std::move(held_out);
  spec.validate();
  return spec;
}

std::vector<VariableId> select_variables(const ObservationSpec& spec, Rng& rng, SelectionTrace* trace) {
  std::vector<VariableId> selected;
  SelectionTrace local_trace;

  if (spec.mode == ObservationMode::fully_observed) {
    selected.reserve(spec.n_nodes);
    for (std::uint32_t v = 0; v < spec.n_nodes; ++v) selected.push_back(VariableId{v});
    local_trace.neighbourhood_size = selected.size();
  } else {
    const VariableId center{static_cast<std::uint32_t>(rng.below(spec.n_nodes))};
    const std::size_t k = sample_radius(spec.radius, rng);
    const auto neighbourhood = undirected_neighborhood(spec.locality_graph, center, k);
    local_trace.center = center;
    local_trace.radius = k;
    local_trace.neighbourhood_size = neighbourhood.size();
    selected.reserve(neighbourhood.size());
    for (VariableId v : neighbourhood) {
      if (rng.bernoulli(spec.dropout)) {
        ++local_trace.dropped;
      } else {
        selected.push_back(v);
      }
    }
  }

  for (const HeldOutPair& pair : spec.held_out) {
    const bool has_a = std::binary_search(selected.begin(), selected.end(), pair.a);
    const bool has_b = std::binary_search(selected.begin(), selected.end(), pair.b);
    if (has_a && has_b) {
      const VariableId drop = rng.bernoulli(0.5) ? pair.a : pair.b;
      selected.erase(std::lower_bound(selected.begin(), selected.end(), drop));
      ++local_trace.held_out_removed;
    }
  }
  if (trace) *trace = local_trace;
  return selected;
}

std::size_t verify_exclusion(std::span<const std::vector<VariableId>> samples,
                             std::span<const HeldOutPair> held_out) {
  std::size_t violations = 0;
  for (const auto& vars : samples) {
    auto has = [&](VariableId v) { return std::find(vars.begin(), vars.end(), v) != vars.end(); };
    for (const HeldOutPair& pair : held_out) {
      if (has(pair.a) && has(pair.b)) {
        ++violations;
        break;
      }
    }
  }
  return violations;
}

}  // namespace locality_lab
