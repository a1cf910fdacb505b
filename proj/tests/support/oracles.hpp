#pragma once

// Slow, obviously-correct reference implementations used to check the
// library. Nothing here shares code with core/ beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "locality_lab/graph.hpp"
#include "locality_lab/theory.hpp"

namespace oracle {

using locality_lab::Bit;
using locality_lab::BayesNet;
using locality_lab::Dag;
using locality_lab::VariableId;

/// p(world) for every world w in [0, 2^n), bit i of w = value of X<i>.
inline std::vector<double> joint(const BayesNet& net) {
  const std::size_t n = net.size();
  std::vector<double> p(std::size_t{1} << n, 1.0);
  for (std::size_t w = 0; w < p.size(); ++w) {
    for (std::size_t v = 0; v < n; ++v) {
      const auto& cpt = net.cpt(VariableId{static_cast<std::uint32_t>(v)});
      std::uint32_t row = 0;
      for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
        if ((w >> cpt.parents[k].index) & 1U) row |= 1U << k;
      }
      const double p1 = cpt.table[row];
      p[w] *= ((w >> v) & 1U) ? p1 : 1.0 - p1;
    }
  }
  return p;
}

/// p(target = 1 | evidence) by summing the full joint.
inline double conditional(const std::vector<double>& joint, VariableId target,
                          const std::vector<std::pair<VariableId, Bit>>& evidence) {
  double num = 0.0, den = 0.0;
  for (std::size_t w = 0; w < joint.size(); ++w) {
    bool ok = true;
    for (const auto& [v, b] : evidence) ok = ok && (((w >> v.index) & 1U) == b);
    if (!ok) continue;
    den += joint[w];
    if ((w >> target.index) & 1U) num += joint[w];
  }
  return num / den;
}

inline bool is_descendant_or_self(const Dag& dag, VariableId node, VariableId of) {
  return dag.reaches(of, node);
}

/// d-separation by enumerating every simple undirected path from a to b.
inline bool d_separated_by_paths(const Dag& dag, VariableId a, VariableId b,
                                 const std::vector<VariableId>& given) {
  const std::size_t n = dag.size();
  std::vector<char> in_given(n, 0);
  for (VariableId z : given) in_given[z.index] = 1;
  auto given_desc = [&](VariableId v) {
    for (std::size_t z = 0; z < n; ++z) {
      if (in_given[z] && dag.reaches(v, VariableId{static_cast<std::uint32_t>(z)})) return true;
    }
    return false;
  };
  std::vector<VariableId> path{a};
  std::vector<char> on_path(n, 0);
  on_path[a.index] = 1;
  bool active_found = false;
  std::function<void(VariableId)> walk = [&](VariableId u) {
    if (active_found) return;
    if (u == b) {
      bool active = true;
      for (std::size_t k = 1; k + 1 < path.size() && active; ++k) {
        const VariableId prev = path[k - 1], mid = path[k], next = path[k + 1];
        const bool collider = dag.has_edge(prev, mid) && dag.has_edge(next, mid);
        active = collider ? given_desc(mid) : !in_given[mid.index];
      }
      active_found = active;
      return;
    }
    for (std::uint32_t w = 0; w < n; ++w) {
      const VariableId v{w};
      if (on_path[w] || !dag.adjacent(u, v)) continue;
      on_path[w] = 1;
      path.push_back(v);
      walk(v);
      path.pop_back();
      on_path[w] = 0;
    }
  };
  walk(a);
  return !active_found;
}

/// All-pairs undirected distances (Floyd-Warshall); -1 when unreachable.
inline std::vector<std::vector<int>> all_distances(const Dag& dag) {
  const std::size_t n = dag.size();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& [p, c] : dag.edges()) d[p.index][c.index] = d[c.index][p.index] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (int& x : row)
      if (x >= inf) x = -1;
  return d;
}

/// Joint over every value sequence of a chain, index = sum y_i K^i.
inline std::vector<double> chain_joint(const locality_lab::ChainModel& chain) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < chain.n; ++i) total *= chain.arity;
  std::vector<double> p(total);
  std::vector<std::size_t> y(chain.n);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rest = s;
    for (std::size_t i = 0; i < chain.n; ++i) {
      y[i] = rest % chain.arity;
      rest /= chain.arity;
    }
    double q = chain.initial[y[0]];
    for (std::size_t k = 0; k + 1 < chain.n; ++k) q *= chain.transitions[k](y[k], y[k + 1]);
    p[s] = q;
  }
  return p;
}

/// p(Y_i = . | Y_j = y_j) summed from the chain joint.
inline std::vector<double> chain_conditional(const locality_lab::ChainModel& chain, std::size_t i,
                                             std::size_t j, std::size_t y_j) {
  const auto p = chain_joint(chain);
  std::vector<double> out(chain.arity, 0.0);
  double den = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    std::size_t yi = s, yj = s;
    for (std::size_t k = 0; k < i; ++k) yi /= chain.arity;
    for (std::size_t k = 0; k < j; ++k) yj /= chain.arity;
    yi %= chain.arity;
    yj %= chain.arity;
    if (yj != y_j) continue;
    den += p[s];
    out[yi] += p[s];
  }
  for (double& x : out) x /= den;
  return out;
}

/// E[q*(Y_i | Y_{i-1})] with Y_{j+1} .. Y_{i-1} drawn from q* one step at a
/// time, by enumerating all K^(i-j-1) intermediate sequences.
inline std::vector<double> enumerate_scaffold(const locality_lab::RiskMinimizer& q, std::size_t i,
                                              std::size_t j, std::size_t y_j) {
  const std::size_t k = q.arity;
  const std::size_t span = i - j - 1;
  std::size_t total = 1;
  for (std::size_t s = 0; s < span; ++s) total *= k;
  std::vector<double> out(k, 0.0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    double weight = 1.0;
    std::size_t prev = y_j;
    for (std::size_t s = 0; s < span; ++s) {
      const std::size_t y = rest % k;
      rest /= k;
      weight *= q.adjacent[j + s](prev, y);
      prev = y;
    }
    for (std::size_t v = 0; v < k; ++v) out[v] += weight * q.adjacent[i - 1](prev, v);
  }
  return out;
}

}  // namespace oracle
