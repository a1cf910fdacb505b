#include "locality_lab/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "locality_lab/error.hpp"

namespace locality_lab {

namespace {

constexpr double kRescaleBelow = 1e-100;
constexpr double kZeroEvidence = 1e-300;

void rescale_if_tiny(Factor& f) {
  double peak = 0.0;
  for (double x : f.table) peak = std::max(peak, x);
  if (peak > 0.0 && peak < kRescaleBelow) {
    for (double& x : f.table) x /= peak;
    f.log_scale += std::log(peak);
  }
}

// Stride of each `scope` variable inside `sub` (0 when absent).
std::vector<std::uint32_t> strides_in(const std::vector<VariableId>& scope,
                                      const std::vector<VariableId>& sub) {
  std::vector<std::uint32_t> strides(scope.size(), 0);
  for (std::size_t k = 0; k < scope.size(); ++k) {
    auto it = std::lower_bound(sub.begin(), sub.end(), scope[k]);
    if (it != sub.end() && *it == scope[k]) {
      strides[k] = std::uint32_t{1} << static_cast<std::uint32_t>(it - sub.begin());
    }
  }
  return strides;
}

Factor cpt_factor(const BayesNet& net, VariableId v, const std::vector<int>& evidence_value) {
  const Cpt& cpt = net.cpt(v);
  std::vector<VariableId> family = cpt.parents;
  family.push_back(v);
  std::sort(family.begin(), family.end());

  Factor f;
  for (VariableId u : family) {
    if (evidence_value[u.index] < 0) f.scope.push_back(u);
  }
  f.table.assign(std::size_t{1} << f.scope.size(), 0.0);

  // Values of the family for a given free configuration.
  for (std::uint32_t config = 0; config < f.table.size(); ++config) {
    auto value_of = [&](VariableId u) -> std::uint32_t {
      if (evidence_value[u.index] >= 0) return static_cast<std::uint32_t>(evidence_value[u.index]);
      const auto pos = std::lower_bound(f.scope.begin(), f.scope.end(), u) - f.scope.begin();
      return (config >> pos) & 1U;
    };
    std::uint32_t row = 0;
    for (std::size_t k = 0; k < cpt.parents.size(); ++k) row |= value_of(cpt.parents[k]) << k;
    const double p1 = cpt.p1(row);
    f.table[config] = value_of(v) ? p1 : 1.0 - p1;
  }
  return f;
}

std::vector<VariableId> elimination_sequence(const std::vector<Factor>& factors,
                                             const std::vector<VariableId>& to_eliminate,
                                             EliminationOrder order, std::size_t n) {
  if (order == EliminationOrder::ascending) {
    auto seq = to_eliminate;
    std::sort(seq.begin(), seq.end());
    return seq;
  }
  // Greedy min-fill over the interaction graph of the initial factors.
  std::vector<std::set<std::uint32_t>> adj(n);
  for (const Factor& f : factors) {
    for (VariableId a : f.scope) {
      for (VariableId b : f.scope) {
        if (a != b) adj[a.index].insert(b.index);
      }
    }
  }
  std::set<std::uint32_t> remaining;
  for (VariableId v : to_eliminate) remaining.insert(v.index);

  std::vector<VariableId> seq;
  seq.reserve(to_eliminate.size());
  while (!remaining.empty()) {
    std::uint32_t best = 0;
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    for (std::uint32_t v : remaining) {
      std::size_t fill = 0;
      for (auto i = adj[v].begin(); i != adj[v].end(); ++i) {
        for (auto j = std::next(i); j != adj[v].end(); ++j) {
          if (!adj[*i].count(*j)) ++fill;
        }
      }
      if (fill < best_fill) {
        best_fill = fill;
        best = v;
      }
    }
    for (std::uint32_t a : adj[best]) {
      for (std::uint32_t b : adj[best]) {
        if (a != b) adj[a].insert(b);
      }
      adj[a].erase(best);
    }
    adj[best].clear();
    remaining.erase(best);
    seq.push_back(VariableId{best});
  }
  return seq;
}

}  // namespace

// --- Factor ----------------------------------------------------------------

double Factor::at(const Assignment& values) const {
  std::uint32_t config = 0;
  for (std::size_t k = 0; k < scope.size(); ++k) {
    auto it = std::find_if(values.begin(), values.end(),
                           [&](const Observation& o) { return o.var == scope[k]; });
    if (it == values.end()) {
      throw Error(Errc::invalid_argument, "assignment misses " + format_variable(scope[k]));
    }
    config |= static_cast<std::uint32_t>(it->value & 1U) << k;
  }
  return table[config];
}

double Factor::total() const {
  double sum = 0.0;
  for (double x : table) sum += x;
  return sum * std::exp(log_scale);
}

Factor Factor::normalized() const {
  double sum = 0.0;
  for (double x : table) sum += x;
  Factor out{scope, table, 0.0};
  if (sum > 0.0) {
    for (double& x : out.table) x /= sum;
  }
  return out;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.scope.begin(), a.scope.end(), b.scope.begin(), b.scope.end(),
                 std::back_inserter(out.scope));
  const auto sa = strides_in(out.scope, a.scope);
  const auto sb = strides_in(out.scope, b.scope);
  out.table.resize(std::size_t{1} << out.scope.size());
  for (std::uint32_t config = 0; config < out.table.size(); ++config) {
    std::uint32_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < out.scope.size(); ++k) {
      if ((config >> k) & 1U) {
        ia += sa[k];
        ib += sb[k];
      }
    }
    out.table[config] = a.table[ia] * b.table[ib];
  }
  out.log_scale = a.log_scale + b.log_scale;
  rescale_if_tiny(out);
  return out;
}

Factor sum_out(const Factor& f, VariableId var) {
  const auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var) return f;
  const auto pos = static_cast<std::uint32_t>(it - f.scope.begin());
  Factor out;
  out.scope = f.scope;
  out.scope.erase(out.scope.begin() + pos);
  out.log_scale = f.log_scale;
  out.table.resize(std::size_t{1} << out.scope.size());
  const std::uint32_t low_mask = (std::uint32_t{1} << pos) - 1;
  for (std::uint32_t config = 0; config < out.table.size(); ++config) {
    const std::uint32_t base = (config & low_mask) | ((config & ~low_mask) << 1);
    out.table[config] = f.table[base] + f.table[base | (std::uint32_t{1} << pos)];
  }
  rescale_if_tiny(out);
  return out;
}

// --- Variable elimination ----------------------------------------------------

Factor eliminate(const BayesNet& net, std::span<const VariableId> query,
                 const Assignment& evidence, EliminationOrder order) {
  const std::size_t n = net.size();
  std::vector<int> evidence_value(n, -1);
  for (const Observation& o : evidence) {
    if (!net.dag().contains(o.var)) throw Error(Errc::invalid_argument, "evidence variable out of range");
    if (o.value > 1) throw Error(Errc::invalid_argument, "evidence value must be 0 or 1");
    if (evidence_value[o.var.index] >= 0 && evidence_value[o.var.index] != o.value) {
      throw Error(Errc::invalid_argument, "contradictory evidence on " + format_variable(o.var));
    }
    evidence_value[o.var.index] = o.value;
  }
  std::vector<VariableId> query_sorted(query.begin(), query.end());
  std::sort(query_sorted.begin(), query_sorted.end());
  if (std::adjacent_find(query_sorted.begin(), query_sorted.end()) != query_sorted.end()) {
    throw Error(Errc::invalid_argument, "duplicate query variable");
  }
  for (VariableId q : query_sorted) {
    if (!net.dag().contains(q)) throw Error(Errc::invalid_argument, "query variable out of range");
    if (evidence_value[q.index] >= 0) {
      throw Error(Errc::invalid_argument, "query and evidence overlap on " + format_variable(q));
    }
  }

  std::vector<VariableId> seeds = query_sorted;
  for (const Observation& o : evidence) seeds.push_back(o.var);
  const auto relevant = ancestral_closure(net.dag(), seeds);

  std::vector<Factor> factors;
  std::vector<VariableId> to_eliminate;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (!relevant[v]) continue;
    factors.push_back(cpt_factor(net, VariableId{v}, evidence_value));
    if (evidence_value[v] < 0 &&
        !std::binary_search(query_sorted.begin(), query_sorted.end(), VariableId{v})) {
      to_eliminate.push_back(VariableId{v});
    }
  }

  for (VariableId var : elimination_sequence(factors, to_eliminate, order, n)) {
    Factor product{{}, {1.0}, 0.0};
    std::vector<Factor> rest;
    rest.reserve(factors.size());
    for (Factor& f : factors) {
      if (std::binary_search(f.scope.begin(), f.scope.end(), var)) {
        product = multiply(product, f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(sum_out(product, var));
    factors = std::move(rest);
  }

  Factor result{{}, {1.0}, 0.0};
  for (const Factor& f : factors) result = multiply(result, f);
  // Every query variable owns a CPT factor, so the scope is already complete.

  double sum = 0.0;
  for (double x : result.table) sum += x;
  if (!(sum > 0.0) || std::log(sum) + result.log_scale < std::log(kZeroEvidence)) {
    throw Error(Errc::zero_probability_evidence, "evidence has probability zero");
  }
  return result;
}

double conditional(const BayesNet& net, VariableId target, Bit value, const Assignment& evidence) {
  const VariableId query[] = {target};
  const Factor f = eliminate(net, query, evidence);
  const double denom = f.table[0] + f.table[1];
  return f.table[value ? 1 : 0] / denom;
}

double marginal(const BayesNet& net, VariableId var) { return conditional(net, var, 1, {}); }

Factor pairwise_joint(const BayesNet& net, VariableId a, VariableId b) {
  if (a == b) throw Error(Errc::invalid_argument, "pairwise_joint needs two distinct variables");
  const VariableId query[] = {a, b};
  return eliminate(net, query, {}).normalized();
}

double mutual_information(const Factor& joint) {
  if (joint.scope.size() != 2 || joint.table.size() != 4) {
    throw Error(Errc::invalid_argument, "mutual information needs a 2x2 joint");
  }
  const Factor p = joint.normalized();
  // config bit 0 is scope[0], bit 1 is scope[1].
  const double pa[2] = {p.table[0] + p.table[2], p.table[1] + p.table[3]};
  const double pb[2] = {p.table[0] + p.table[1], p.table[2] + p.table[3]};
  double mi = 0.0;
  for (std::uint32_t config = 0; config < 4; ++config) {
    const double pab = p.table[config];
    if (pab > 0.0) mi += pab * std::log(pab / (pa[config & 1U] * pb[config >> 1]));
  }
  return std::max(mi, 0.0);
}

double mutual_information(const BayesNet& net, VariableId a, VariableId b) {
  return mutual_information(pairwise_joint(net, a, b));
}

Factor brute_force_joint(const BayesNet& net) {
  const std::size_t n = net.size();
  if (n > kMaxEnumerationNodes) {
    throw Error(Errc::too_large, "enumeration limited to " + std::to_string(kMaxEnumerationNodes) +
                                     " nodes, net has " + std::to_string(n));
  }
  Factor joint;
  for (std::uint32_t v = 0; v < n; ++v) joint.scope.push_back(VariableId{v});
  joint.table.resize(std::size_t{1} << n);
  for (std::uint32_t config = 0; config < joint.table.size(); ++config) {
    double p = 1.0;
    for (std::uint32_t v = 0; v < n; ++v) {
      const Cpt& cpt = net.cpt(VariableId{v});
      std::uint32_t row = 0;
      for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
        row |= ((config >> cpt.parents[k].index) & 1U) << k;
      }
      const double p1 = cpt.p1(row);
      p *= ((config >> v) & 1U) ? p1 : 1.0 - p1;
    }
    joint.table[config] = p;
  }
  return joint;
}

}  // namespace locality_lab
