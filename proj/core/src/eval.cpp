#include "locality_lab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"
#include "locality_lab/net_io.hpp"
#include "locality_lab/parallel.hpp"

namespace locality_lab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<VariableId> trace_vars(const Trace& t) {
  std::vector<VariableId> vars;
  for (const auto& o : t.steps) vars.push_back(o.var);
  return vars;
}

std::string num(double x) { return std::isnan(x) ? "" : format_double(x); }

void fill_from_estimate(EstimateRecord& rec, const Estimate& est, const Dag& dag) {
  rec.estimate = est.value;
  rec.overflowed = est.overflowed;
  double length = 0.0;
  for (const auto& t : est.traces) length += static_cast<double>(t.steps.size());
  rec.mean_trace_length = est.traces.empty() ? 0.0 : length / static_cast<double>(est.traces.size());
  rec.trace_d_separation = d_separation_rate(est.traces, dag, rec.query);
}

nlohmann::ordered_json ci_json(const ConfidenceInterval& ci) {
  return {{"mean", ci.mean}, {"lo", ci.lo}, {"hi", ci.hi}};
}

}  // namespace

std::vector<Query> queries_for_pair(const HeldOutPair& pair) {
  return {Query{pair.b, 0, pair.a, 1}, Query{pair.b, 1, pair.a, 1}, Query{pair.a, 0, pair.b, 1},
          Query{pair.a, 1, pair.b, 1}};
}

QueryBattery build_battery(const BayesNet& net, std::span<const HeldOutPair> pairs) {
  QueryBattery battery;
  for (const auto& pair : pairs) {
    for (const Query& q : queries_for_pair(pair)) {
      try {
        PreparedQuery pq{q, 0.0, 0.0};
        pq.true_conditional = conditional(net, q.target, q.target_value, {{q.observed, q.observed_value}});
        const double m1 = marginal(net, q.target);
        pq.marginal = q.target_value ? m1 : 1.0 - m1;
        battery.queries.push_back(pq);
      } catch (const Error& e) {
        if (e.code() != Errc::zero_probability_evidence) throw;
        battery.skipped.push_back({q, std::string(to_string(e.code()))});
      }
    }
  }
  return battery;
}

double d_separation_rate(std::span<const Trace> traces, const Dag& dag, const Query& query) {
  if (traces.empty()) return kNaN;
  std::size_t hits = 0;
  for (const auto& t : traces) {
    if (d_separated(dag, query.observed, query.target, trace_vars(t))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(traces.size());
}

EvalResult evaluate(const SequenceModel& model, const BayesNet& net, const QueryBattery& battery,
                    const EvalOptions& options) {
  if (options.estimators.empty()) throw Error(Errc::invalid_argument, "no estimators requested");
  if (options.m_samples == 0) throw Error(Errc::invalid_argument, "M must be at least 1");
  const std::size_t n_est = options.estimators.size();
  const std::size_t n_q = battery.queries.size();
  const std::size_t max_steps = options.max_steps ? options.max_steps : 2 * net.size();
  const Dag& dag = net.dag();

  EvalResult result;
  result.skipped = battery.skipped;
  result.records.resize(n_q * n_est);
  std::vector<std::vector<std::string>> warnings(n_q);

  parallel_for(n_q, resolve_workers(options.workers), [&](std::size_t qi) {
    const PreparedQuery& pq = battery.queries[qi];
    const std::uint64_t query_seed = derive_seed(options.seed, qi);
    std::optional<ScaffoldPlan> plan;
    auto get_plan = [&]() -> const ScaffoldPlan& {
      if (!plan) {
        plan = build_scaffold(dag, pq.query);
        if (options.cooccurrence) warnings[qi] = cooccurrence_warnings(*plan, pq.query, options.cooccurrence);
      }
      return *plan;
    };
    for (std::size_t ei = 0; ei < n_est; ++ei) {
      const EstimatorKind kind = options.estimators[ei];
      Rng rng(derive_seed(query_seed, static_cast<std::uint64_t>(kind)));
      EstimateRecord& rec = result.records[qi * n_est + ei];
      rec.condition = options.condition;
      rec.net_id = options.net_id;
      rec.estimator = kind;
      rec.query = pq.query;
      rec.true_conditional = pq.true_conditional;
      rec.marginal = pq.marginal;
      rec.corpus_tokens = options.corpus_tokens;
      rec.m = options.m_samples;
      try {
        switch (kind) {
          case EstimatorKind::direct: {
            Estimate est;
            est.value = direct(model, pq.query);
            est.traces.push_back(Trace{{}, est.value});
            fill_from_estimate(rec, est, dag);
            break;
          }
          case EstimatorKind::scaffolded: {
            const auto& p = get_plan();
            rec.plan_size = p.size();
            fill_from_estimate(rec, scaffolded(model, pq.query, p, options.m_samples, rng), dag);
            break;
          }
          case EstimatorKind::negative_scaffolded: {
            const auto neg = negative_scaffold(dag, get_plan(), pq.query, rng);
            rec.plan_size = neg.size();
            fill_from_estimate(rec, scaffolded(model, pq.query, neg, options.m_samples, rng), dag);
            break;
          }
          case EstimatorKind::free_generation:
            fill_from_estimate(rec, free_generation(model, pq.query, options.m_samples, max_steps, rng), dag);
            break;
        }
        rec.squared_error_true = (rec.estimate - rec.true_conditional) * (rec.estimate - rec.true_conditional);
        rec.squared_error_marginal = (rec.estimate - rec.marginal) * (rec.estimate - rec.marginal);
      } catch (const Error& e) {
        rec.error = std::string(to_string(e.code()));
        rec.estimate = rec.squared_error_true = rec.squared_error_marginal = kNaN;
        rec.mean_trace_length = rec.trace_d_separation = kNaN;
      }
    }
  });
  for (auto& w : warnings) {
    for (auto& msg : w) result.warnings.push_back(std::move(msg));
  }
  return result;
}

EvalResult evaluate(const SequenceModel& model, const BayesNet& net, std::span<const HeldOutPair> pairs,
                    const EvalOptions& options) {
  return evaluate(model, net, build_battery(net, pairs), options);
}

ConfidenceInterval bootstrap_mean_ci(std::span<const double> values, std::uint64_t seed,
                                     std::size_t resamples, double level) {
  if (values.empty()) return {kNaN, kNaN, kNaN};
  if (resamples == 0 || !(level > 0.0 && level < 1.0)) {
    throw Error(Errc::invalid_argument, "bootstrap needs resamples > 0 and level in (0, 1)");
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += values[rng.below(values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, resamples - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {mean, std::min(mean, quantile(tail)), std::max(mean, quantile(1.0 - tail))};
}

std::vector<SummaryRow> summarize(std::span<const EstimateRecord> records, std::uint64_t seed,
                                  std::size_t resamples) {
  using Key = std::tuple<std::string, int, std::size_t, std::size_t>;
  std::map<Key, std::size_t> index;
  std::vector<SummaryRow> rows;
  std::vector<std::vector<const EstimateRecord*>> members;
  for (const auto& r : records) {
    const Key key{r.condition, static_cast<int>(r.estimator), r.corpus_tokens, r.m};
    auto [it, fresh] = index.emplace(key, rows.size());
    if (fresh) {
      SummaryRow row;
      row.condition = r.condition;
      row.estimator = r.estimator;
      row.corpus_tokens = r.corpus_tokens;
      row.m = r.m;
      rows.push_back(row);
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    std::vector<double> se_true, se_marg;
    double length = 0.0, dsep = 0.0;
    std::size_t dsep_n = 0;
    for (const auto* r : members[g]) {
      if (!r->error.empty()) {
        ++rows[g].errors;
        continue;
      }
      se_true.push_back(r->squared_error_true);
      se_marg.push_back(r->squared_error_marginal);
      length += r->mean_trace_length;
      if (!std::isnan(r->trace_d_separation)) {
        dsep += r->trace_d_separation;
        ++dsep_n;
      }
    }
    rows[g].n = se_true.size();
    rows[g].mse_true = bootstrap_mean_ci(se_true, derive_seed(seed, 2 * g), resamples);
    rows[g].mse_marginal = bootstrap_mean_ci(se_marg, derive_seed(seed, 2 * g + 1), resamples);
    rows[g].mean_trace_length = se_true.empty() ? kNaN : length / static_cast<double>(se_true.size());
    rows[g].d_separation_rate = dsep_n ? dsep / static_cast<double>(dsep_n) : kNaN;
  }
  return rows;
}

std::string records_csv(std::span<const EstimateRecord> records) {
  std::string out =
      "condition,net_id,estimator,observed,observed_value,target,target_value,estimate,"
      "true_conditional,marginal,squared_error_true,squared_error_marginal,plan_size,"
      "mean_trace_length,trace_d_separation,m,corpus_tokens,overflowed,error\n";
  for (const auto& r : records) {
    out += r.condition + "," + std::to_string(r.net_id) + "," + std::string(to_string(r.estimator)) + "," +
           format_variable(r.query.observed) + "," + std::to_string(r.query.observed_value) + "," +
           format_variable(r.query.target) + "," + std::to_string(r.query.target_value) + "," +
           num(r.estimate) + "," + num(r.true_conditional) + "," + num(r.marginal) + "," +
           num(r.squared_error_true) + "," + num(r.squared_error_marginal) + "," +
           std::to_string(r.plan_size) + "," + num(r.mean_trace_length) + "," +
           num(r.trace_d_separation) + "," + std::to_string(r.m) + "," + std::to_string(r.corpus_tokens) +
           "," + std::to_string(r.overflowed) + "," + r.error + "\n";
  }
  return out;
}

std::string summary_json(std::span<const SummaryRow> rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["condition"] = r.condition;
    row["estimator"] = std::string(to_string(r.estimator));
    row["corpus_tokens"] = r.corpus_tokens;
    row["m"] = r.m;
    row["n"] = r.n;
    row["errors"] = r.errors;
    row["mse_true"] = ci_json(r.mse_true);
    row["mse_marginal"] = ci_json(r.mse_marginal);
    row["mean_trace_length"] = r.mean_trace_length;
    row["d_separation_rate"] = r.d_separation_rate;
    arr.push_back(std::move(row));
  }
  return nlohmann::ordered_json{{"summary", std::move(arr)}}.dump(2) + "\n";
}

std::string plot_csv(std::span<const SummaryRow> rows) {
  std::string out = "condition,estimator,tokens,m,mse,ci_lo,ci_hi\n";
  for (const auto& r : rows) {
    out += r.condition + "," + std::string(to_string(r.estimator)) + "," + std::to_string(r.corpus_tokens) +
           "," + std::to_string(r.m) + "," + num(r.mse_true.mean) + "," + num(r.mse_true.lo) + "," +
           num(r.mse_true.hi) + "\n";
  }
  return out;
}

std::vector<SummaryRow> learning_curve(std::span<const Sample> corpus, std::span<const std::size_t> budgets,
                                       const BayesNet& net, std::span<const HeldOutPair> pairs,
                                       double alpha, double tau, const EvalOptions& options,
                                       std::vector<EstimateRecord>* records) {
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw Error(Errc::invalid_argument, "token budgets must ascend");
  }
  const QueryBattery battery = build_battery(net, pairs);
  std::vector<EstimateRecord> all;
  EmpiricalBackoffModel model(net.size(), alpha, tau);
  std::size_t next = 0;
  std::size_t used = 0;
  for (std::size_t budget : budgets) {
    // Models for successive budgets share a prefix, so keep adding to one.
    while (next < corpus.size()) {
      const std::size_t len = serialize_sample(corpus[next]).size();
      if (used + len > budget) break;
      model.add(corpus[next]);
      used += len;
      ++next;
    }
    EvalOptions opts = options;
    opts.corpus_tokens = budget;
    auto result = evaluate(model, net, battery, opts);
    all.insert(all.end(), result.records.begin(), result.records.end());
  }
  auto rows = summarize(all, options.seed);
  if (records) *records = std::move(all);
  return rows;
}

std::vector<SummaryRow> sample_count_sweep(const SequenceModel& model, const BayesNet& net,
                                           std::span<const HeldOutPair> pairs,
                                           std::span<const std::size_t> ms, const EvalOptions& options,
                                           std::vector<EstimateRecord>* records) {
  const QueryBattery battery = build_battery(net, pairs);
  std::vector<EstimateRecord> all;
  for (std::size_t m : ms) {
    if (m == 0) throw Error(Errc::invalid_argument, "M must be at least 1");
    EvalOptions opts = options;
    opts.m_samples = m;
    auto result = evaluate(model, net, battery, opts);
    all.insert(all.end(), result.records.begin(), result.records.end());
  }
  auto rows = summarize(all, options.seed);
  if (records) *records = std::move(all);
  return rows;
}

}  // namespace locality_lab
