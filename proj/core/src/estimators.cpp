#include "locality_lab/estimators.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"

namespace locality_lab {

namespace {

double at_value(double p1, Bit value) { return value ? p1 : 1.0 - p1; }

PromptState start_state(const Query& query) {
  return PromptState{query.target, {{query.observed, query.observed_value}}};
}

VariableId draw_variable(const NextVariableDistribution& dist, Rng& rng) {
  double u = rng.uniform();
  for (const auto& [v, p] : dist) {
    u -= p;
    if (u < 0.0) return v;
  }
  // Rounding left u >= 0: take the last candidate with positive mass.
  for (auto it = dist.rbegin(); it != dist.rend(); ++it) {
    if (it->second > 0.0) return it->first;
  }
  throw Error(Errc::protocol_error, "next-variable distribution has no mass");
}

}  // namespace

void Query::validate() const {
  if (observed == target) throw Error(Errc::invalid_argument, "observed and target must differ");
  if (observed_value > 1 || target_value > 1) throw Error(Errc::invalid_argument, "values must be bits");
}

std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::direct: return "direct";
    case EstimatorKind::scaffolded: return "scaffolded";
    case EstimatorKind::negative_scaffolded: return "negative_scaffolded";
    case EstimatorKind::free_generation: return "free";
  }
  return "direct";
}

EstimatorKind parse_estimator(std::string_view text) {
  if (text == "direct") return EstimatorKind::direct;
  if (text == "scaffolded") return EstimatorKind::scaffolded;
  if (text == "negative_scaffolded" || text == "negative") return EstimatorKind::negative_scaffolded;
  if (text == "free" || text == "free_generation") return EstimatorKind::free_generation;
  throw Error(Errc::invalid_argument, "unknown estimator '" + std::string(text) + "'");
}

double direct(const SequenceModel& model, const Query& query) {
  query.validate();
  return at_value(model.value_p1(start_state(query), query.target), query.target_value);
}

ScaffoldPlan order_by_distance(const Dag& dag, VariableId from, std::vector<VariableId> vars) {
  const auto dist = undirected_distances(dag, from);
  auto key = [&](VariableId v) {
    const int d = dist[v.index];
    return std::pair<long, std::uint32_t>(d < 0 ? std::numeric_limits<long>::max() : d, v.index);
  };
  std::sort(vars.begin(), vars.end(), [&](VariableId l, VariableId r) { return key(l) < key(r); });
  return vars;
}

ScaffoldPlan build_scaffold(const Dag& dag, const Query& query) {
  query.validate();
  if (dag.adjacent(query.observed, query.target)) {
    throw Error(Errc::adjacent_pair, format_variable(query.observed) + " and " +
                                         format_variable(query.target) + " share an edge");
  }
  return order_by_distance(dag, query.observed, minimal_d_separator(dag, query.observed, query.target));
}

Estimate scaffolded(const SequenceModel& model, const Query& query, std::span<const VariableId> plan,
                    std::size_t m_samples, Rng& rng) {
  query.validate();
  if (m_samples == 0) throw Error(Errc::invalid_argument, "M must be at least 1");
  for (VariableId v : plan) {
    if (v == query.observed || v == query.target) {
      throw Error(Errc::invalid_argument, "scaffold may not contain the observed or target variable");
    }
  }
  Estimate est;
  est.traces.reserve(m_samples);
  double total = 0.0;
  for (std::size_t m = 0; m < m_samples; ++m) {
    PromptState state = start_state(query);
    Trace trace;
    for (VariableId v : plan) {
      const Bit bit = rng.bernoulli(model.value_p1(state, v)) ? 1 : 0;
      state.context.push_back({v, bit});
      trace.steps.push_back({v, bit});
    }
    trace.terminal = at_value(model.value_p1(state, query.target), query.target_value);
    total += trace.terminal;
    est.traces.push_back(std::move(trace));
  }
  est.value = total / static_cast<double>(m_samples);
  return est;
}

ScaffoldPlan negative_scaffold(const Dag& dag, std::span<const VariableId> plan, const Query& query,
                               Rng& rng) {
  query.validate();
  std::vector<char> excluded(dag.size(), 0);
  for (VariableId v : plan) excluded.at(v.index) = 1;
  excluded.at(query.observed.index) = 1;
  excluded.at(query.target.index) = 1;
  std::vector<VariableId> eligible;
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    if (!excluded[v]) eligible.push_back(VariableId{v});
  }
  if (eligible.size() < plan.size()) {
    throw Error(Errc::insufficient_variables, "need " + std::to_string(plan.size()) + " variables, " +
                                                  std::to_string(eligible.size()) + " eligible");
  }
  // Partial Fisher-Yates: the first |plan| slots are a uniform subset.
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(plan.size());
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

Estimate free_generation(const SequenceModel& model, const Query& query, std::size_t m_samples,
                         std::size_t max_steps, Rng& rng) {
  query.validate();
  if (m_samples == 0) throw Error(Errc::invalid_argument, "M must be at least 1");
  Estimate est;
  double total = 0.0;
  for (std::size_t m = 0; m < m_samples; ++m) {
    PromptState state = start_state(query);
    Trace trace;
    bool finished = false;
    for (;;) {
      const VariableId next = draw_variable(model.next_variable(state), rng);
      if (next == query.target) {
        trace.terminal = at_value(model.value_p1(state, query.target), query.target_value);
        finished = true;
        break;
      }
      if (trace.steps.size() == max_steps) break;
      const Bit bit = rng.bernoulli(model.value_p1(state, next)) ? 1 : 0;
      state.context.push_back({next, bit});
      trace.steps.push_back({next, bit});
    }
    if (!finished) {
      ++est.overflowed;
      continue;
    }
    total += trace.terminal;
    est.traces.push_back(std::move(trace));
  }
  if (est.traces.empty()) {
    throw Error(Errc::estimation_failed, "all " + std::to_string(m_samples) +
                                             " repetitions exceeded " + std::to_string(max_steps) +
                                             " steps");
  }
  est.value = total / static_cast<double>(est.traces.size());
  return est;
}

std::vector<std::string> cooccurrence_warnings(
    std::span<const VariableId> plan, const Query& query,
    const std::function<std::size_t(VariableId, VariableId)>& cooccurrence) {
  std::vector<std::string> warnings;
  VariableId previous = query.observed;
  for (VariableId v : plan) {
    if (cooccurrence(v, previous) == 0 && cooccurrence(v, query.observed) == 0 &&
        cooccurrence(v, query.target) == 0) {
      warnings.push_back("scaffold member " + format_variable(v) + " never co-occurred with " +
                         format_variable(previous) + ", " + format_variable(query.observed) +
                         " or " + format_variable(query.target));
    }
    previous = v;
  }
  return warnings;
}

}  // namespace locality_lab
