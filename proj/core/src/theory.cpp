#include "locality_lab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "locality_lab/error.hpp"

namespace locality_lab {

namespace {

Distribution uniform(std::size_t k) { return Distribution(k, 1.0 / static_cast<double>(k)); }

Distribution propagate(std::span<const double> dist, const Matrix& m) {
  Distribution out(m.cols, 0.0);
  for (std::size_t a = 0; a < m.rows; ++a) {
    if (dist[a] == 0.0) continue;
    for (std::size_t b = 0; b < m.cols; ++b) out[b] += dist[a] * m(a, b);
  }
  return out;
}

// -sum target * log q, skipping zero-mass outcomes.
double cross_entropy(std::span<const double> target, std::span<const double> q) {
  double h = 0.0;
  for (std::size_t v = 0; v < target.size(); ++v) {
    if (target[v] == 0.0) continue;
    if (q[v] <= 0.0) throw Error(Errc::log_of_zero, "q assigns zero to an outcome with mass");
    h -= target[v] * std::log(q[v]);
  }
  return h;
}

void check_index(const ChainModel& chain, std::size_t i) {
  if (i >= chain.n) throw Error(Errc::invalid_argument, "chain index out of range");
}

}  // namespace

void ChainModel::validate() const {
  if (n < 2 || arity < 2) throw Error(Errc::invalid_argument, "chain needs n >= 2 and arity >= 2");
  if (initial.size() != arity || transitions.size() != n - 1) {
    throw Error(Errc::invalid_argument, "chain shape mismatch");
  }
  auto check_dist = [](std::span<const double> d) {
    double s = 0.0;
    for (double x : d) {
      if (!(x >= 0.0)) throw Error(Errc::invalid_argument, "negative probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error(Errc::invalid_argument, "distribution does not sum to 1");
  };
  check_dist(initial);
  for (const Matrix& t : transitions) {
    if (t.rows != arity || t.cols != arity) throw Error(Errc::invalid_argument, "transition shape mismatch");
    for (std::size_t r = 0; r < arity; ++r) check_dist(t.row(r));
  }
}

bool ChainModel::doubly_stochastic(double tol) const {
  for (const Matrix& t : transitions) {
    for (std::size_t c = 0; c < t.cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < t.rows; ++r) s += t(r, c);
      if (std::abs(s - 1.0) > tol) return false;
    }
  }
  return true;
}

Matrix sinkhorn(Matrix m, double tol) {
  for (std::size_t iter = 0; iter < kMaxSinkhornIterations; ++iter) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c);
      if (s <= 0.0) throw Error(Errc::sinkhorn_no_convergence, "zero row");
      for (std::size_t c = 0; c < m.cols; ++c) m(r, c) /= s;
    }
    std::vector<double> col(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) col[c] += m(r, c);
    }
    double worst = 0.0;
    for (double s : col) worst = std::max(worst, std::abs(s - 1.0));
    if (worst < tol) return m;
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) m(r, c) /= col[c];
    }
  }
  throw Error(Errc::sinkhorn_no_convergence,
              "not balanced after " + std::to_string(kMaxSinkhornIterations) + " iterations");
}

ChainModel random_chain(std::size_t n, std::size_t arity, Rng& rng, bool doubly_stochastic) {
  if (n < 3 || arity < 2) throw Error(Errc::invalid_argument, "random_chain needs n >= 3 and arity >= 2");
  auto dirichlet_row = [&](std::span<double> row) {
    double s = 0.0;
    for (double& x : row) {
      x = -std::log(rng.uniform_open());
      s += x;
    }
    for (double& x : row) x /= s;
  };
  ChainModel chain;
  chain.n = n;
  chain.arity = arity;
  chain.initial.assign(arity, 0.0);
  if (doubly_stochastic) {
    chain.initial = uniform(arity);
  } else {
    dirichlet_row(chain.initial);
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Matrix t(arity, arity);
    for (std::size_t r = 0; r < arity; ++r) dirichlet_row({t.data.data() + r * arity, arity});
    chain.transitions.push_back(doubly_stochastic ? sinkhorn(std::move(t)) : std::move(t));
  }
  return chain;
}

Distribution chain_marginal(const ChainModel& chain, std::size_t i) {
  check_index(chain, i);
  Distribution d = chain.initial;
  for (std::size_t k = 0; k < i; ++k) d = propagate(d, chain.transitions[k]);
  return d;
}

Distribution chain_conditional(const ChainModel& chain, std::size_t i, std::size_t j, std::size_t y_j) {
  check_index(chain, i);
  if (i <= j) throw Error(Errc::invalid_argument, "chain_conditional needs i > j");
  if (y_j >= chain.arity) throw Error(Errc::invalid_argument, "value out of range");
  Distribution d(chain.arity, 0.0);
  d[y_j] = 1.0;
  for (std::size_t k = j; k < i; ++k) d = propagate(d, chain.transitions[k]);
  return d;
}

Distribution chain_backward(const ChainModel& chain, std::size_t j, std::size_t y) {
  check_index(chain, j + 1);
  const Distribution pj = chain_marginal(chain, j);
  const Matrix& t = chain.transitions[j];
  Distribution d(chain.arity, 0.0);
  double s = 0.0;
  for (std::size_t a = 0; a < chain.arity; ++a) {
    d[a] = pj[a] * t(a, y);
    s += d[a];
  }
  if (s == 0.0) return uniform(chain.arity);
  for (double& x : d) x /= s;
  return d;
}

Distribution mixture_minimizer(std::span<const double> p1, std::span<const double> p2, double a1, double a2) {
  if (p1.size() != p2.size()) throw Error(Errc::invalid_argument, "distributions differ in size");
  if (!(a1 >= 0.0 && a2 >= 0.0) || a1 + a2 == 0.0) {
    throw Error(Errc::invalid_argument, "weights must be nonnegative and not both zero");
  }
  Distribution q(p1.size());
  for (std::size_t v = 0; v < q.size(); ++v) q[v] = (a1 * p1[v] + a2 * p2[v]) / (a1 + a2);
  return q;
}

double weighted_cross_entropy(std::span<const double> p1, std::span<const double> p2, double a1,
                              double a2, std::span<const double> q) {
  double h = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) {
    const double mass = a1 * p1[v] + a2 * p2[v];
    if (mass == 0.0) continue;
    if (q[v] <= 0.0) return std::numeric_limits<double>::infinity();
    h -= mass * std::log(q[v]);
  }
  return h;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] == 0.0) continue;
    if (q[v] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[v] * std::log(p[v] / q[v]);
  }
  return kl;
}

std::string_view to_string(Formulation f) noexcept {
  return f == Formulation::marginal_mixture ? "marginal_mixture" : "uniform_mixture";
}

Formulation parse_formulation(std::string_view text) {
  if (text == "marginal_mixture") return Formulation::marginal_mixture;
  if (text == "uniform_mixture") return Formulation::uniform_mixture;
  throw Error(Errc::invalid_argument, "unknown formulation '" + std::string(text) + "'");
}

PairModel::PairModel(std::size_t n_, std::size_t arity_)
    : n(n_), arity(arity_), first(n_, uniform(arity_)), cond(n_ * n_ * arity_ * arity_, 0.0) {}

Distribution RiskMinimizer::baseline(std::size_t i) const {
  return formulation == Formulation::marginal_mixture ? marginals.at(i) : uniform(arity);
}

Distribution RiskMinimizer::predict(std::size_t i, std::size_t j, std::size_t y_j) const {
  if (i >= n || j >= n || i == j || y_j >= arity) throw Error(Errc::invalid_argument, "bad q* query");
  if (i == j + 1) {
    const auto r = adjacent[j].row(y_j);
    return Distribution(r.begin(), r.end());
  }
  if (formulation == Formulation::marginal_mixture && j == i + 1) return backward_rows[i * arity + y_j];
  return baseline(i);
}

PairModel RiskMinimizer::table() const {
  PairModel q(n, arity);
  q.first = first;
  for (std::size_t i1 = 0; i1 < n; ++i1) {
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (i1 == i2) continue;
      for (std::size_t v1 = 0; v1 < arity; ++v1) {
        const Distribution d = predict(i2, i1, v1);
        std::copy(d.begin(), d.end(), q.row(i1, v1, i2).begin());
      }
    }
  }
  return q;
}

RiskMinimizer risk_minimizer(const ChainModel& chain, Formulation formulation, double uniform_weight) {
  chain.validate();
  if (!(uniform_weight >= 0.0)) throw Error(Errc::invalid_argument, "uniform_weight must be nonnegative");
  const std::size_t n = chain.n;
  const std::size_t K = chain.arity;
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(K);
  RiskMinimizer q;
  q.formulation = formulation;
  q.uniform_weight = uniform_weight;
  q.n = n;
  q.arity = K;
  for (std::size_t i = 0; i < n; ++i) q.marginals.push_back(chain_marginal(chain, i));
  const Distribution flat = uniform(K);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Matrix& t = chain.transitions[k];
    Matrix adj(K, K);
    Distribution lam(K);
    for (std::size_t v = 0; v < K; ++v) {
      Distribution row;
      if (formulation == Formulation::marginal_mixture) {
        row = mixture_minimizer(t.row(v), q.marginals[k + 1], 1.0, 1.0);
        lam[v] = 0.5;
      } else {
        const double p_w = q.marginals[k][v] / (dn - 1.0);
        const double u_w = uniform_weight / (dn * (dn - 1.0) * dk);
        if (p_w + u_w == 0.0) {
          row.assign(t.row(v).begin(), t.row(v).end());
          lam[v] = 0.0;
        } else {
          row = mixture_minimizer(t.row(v), flat, p_w, u_w);
          lam[v] = u_w / (u_w + p_w);
        }
      }
      std::copy(row.begin(), row.end(), adj.data.begin() + static_cast<std::ptrdiff_t>(v * K));
    }
    q.adjacent.push_back(std::move(adj));
    q.lambdas.push_back(std::move(lam));
  }

  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (std::size_t v = 0; v < K; ++v) {
      q.backward_rows.push_back(formulation == Formulation::marginal_mixture
                                    ? mixture_minimizer(chain_backward(chain, k, v), q.marginals[k], 1.0, 1.0)
                                    : flat);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (formulation == Formulation::marginal_mixture) {
      q.first.push_back(q.marginals[i]);
      continue;
    }
    const double a1 = i + 1 < n ? 1.0 / (dn - 1.0) : 0.0;
    const double a2 = uniform_weight / dn;
    q.first.push_back(a1 + a2 > 0.0 ? mixture_minimizer(q.marginals[i], flat, a1, a2) : flat);
  }
  return q;
}

double risk(const ChainModel& chain, const PairModel& q, double uniform_weight) {
  chain.validate();
  if (q.n != chain.n || q.arity != chain.arity) throw Error(Errc::invalid_argument, "q shape mismatch");
  const std::size_t n = chain.n;
  const std::size_t K = chain.arity;
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(K);
  const Distribution flat = uniform(K);
  double r = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Distribution pi = chain_marginal(chain, i);
    r += cross_entropy(pi, q.first[i]) / (dn - 1.0);
    for (std::size_t v = 0; v < K; ++v) {
      if (pi[v] == 0.0) continue;
      r += pi[v] / (dn - 1.0) * cross_entropy(chain.transitions[i].row(v), q.row(i, v, i + 1));
    }
  }
  if (uniform_weight > 0.0) {
    double u = 0.0;
    for (std::size_t i1 = 0; i1 < n; ++i1) {
      u += cross_entropy(flat, q.first[i1]) / dn;
      for (std::size_t v1 = 0; v1 < K; ++v1) {
        for (std::size_t i2 = 0; i2 < n; ++i2) {
          if (i2 == i1) continue;
          u += cross_entropy(flat, q.row(i1, v1, i2)) / (dn * dk * (dn - 1.0));
        }
      }
    }
    r += uniform_weight * u;
  }
  return r;
}

Distribution scaffolded_expectation(const RiskMinimizer& q, std::size_t i, std::size_t j, std::size_t y_j) {
  if (i >= q.n || i <= j + 1) throw Error(Errc::invalid_argument, "scaffolded_expectation needs i > j + 1");
  if (y_j >= q.arity) throw Error(Errc::invalid_argument, "value out of range");
  Distribution d(q.arity, 0.0);
  d[y_j] = 1.0;
  for (std::size_t k = j; k < i; ++k) d = propagate(d, q.adjacent[k]);
  return d;
}

std::string_view to_string(GapStatus s) noexcept {
  switch (s) {
    case GapStatus::holds: return "holds";
    case GapStatus::violated: return "violated";
    case GapStatus::vacuous: return "vacuous";
  }
  return "vacuous";
}

GapReport gap_check(const ChainModel& chain, Formulation formulation, double uniform_weight) {
  chain.validate();
  if (formulation == Formulation::uniform_mixture) {
    const Distribution flat = uniform(chain.arity);
    bool uniform_start = true;
    for (std::size_t v = 0; v < chain.arity; ++v) {
      uniform_start = uniform_start && std::abs(chain.initial[v] - flat[v]) <= 1e-9;
    }
    if (!uniform_start || !chain.doubly_stochastic()) {
      throw Error(Errc::assumption_violated,
                  "uniform_mixture gap needs doubly stochastic transitions and a uniform start");
    }
  }
  const RiskMinimizer q = risk_minimizer(chain, formulation, uniform_weight);
  GapReport report;
  report.formulation = formulation;
  for (std::size_t j = 0; j < chain.n; ++j) {
    for (std::size_t i = j + 2; i < chain.n; ++i) {
      double weight = 1.0;
      for (std::size_t k = j; k < i; ++k) weight *= 1.0 - q.lambdas[k][0];
      const Distribution base = q.baseline(i);
      for (std::size_t y_j = 0; y_j < chain.arity; ++y_j) {
        const Distribution truth = chain_conditional(chain, i, j, y_j);
        const Distribution scaff = scaffolded_expectation(q, i, j, y_j);
        for (std::size_t y_i = 0; y_i < chain.arity; ++y_i) {
          GapRow row{i, j, y_i, y_j};
          const double direct_bias = base[y_i] - truth[y_i];
          row.direct_bias2 = direct_bias * direct_bias;
          row.scaffolded_bias2 = (scaff[y_i] - truth[y_i]) * (scaff[y_i] - truth[y_i]);
          row.conditional_weight = weight;
          if (std::abs(direct_bias) <= kVacuousBias) {
            row.status = GapStatus::vacuous;
            row.ratio = std::numeric_limits<double>::quiet_NaN();
            ++report.vacuous;
          } else {
            row.ratio = row.scaffolded_bias2 / row.direct_bias2;
            row.status = row.scaffolded_bias2 < row.direct_bias2 ? GapStatus::holds : GapStatus::violated;
            ++(row.status == GapStatus::holds ? report.holds : report.violated);
          }
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

std::vector<KlRow> kl_gap_check(const ChainModel& chain) {
  const RiskMinimizer q = risk_minimizer(chain, Formulation::marginal_mixture);
  std::vector<KlRow> rows;
  for (std::size_t k = 0; k + 1 < chain.n; ++k) {
    for (std::size_t v = 0; v < chain.arity; ++v) {
      KlRow row;
      row.edge = k;
      row.value = v;
      const auto truth = chain.transitions[k].row(v);
      row.kl_minimizer = kl_divergence(truth, q.adjacent[k].row(v));
      row.kl_marginal = kl_divergence(truth, q.marginals[k + 1]);
      row.holds = row.kl_minimizer <= row.kl_marginal + 1e-12;
      rows.push_back(row);
    }
  }
  return rows;
}

RiskMinimizerModel::RiskMinimizerModel(RiskMinimizer q) : q_(std::move(q)) {
  if (q_.arity != 2) throw Error(Errc::invalid_argument, "sequence models are binary; chain arity must be 2");
}

double RiskMinimizerModel::value_p1(const PromptState& state, VariableId query) const {
  validate_state(state, q_.n);
  if (query.index >= q_.n) throw Error(Errc::unknown_variable, format_variable(query));
  if (state.context.empty()) return q_.first[query.index][1];
  const Observation& last = state.context.back();
  if (last.var == query) throw Error(Errc::invalid_argument, "query is already in the context");
  return q_.predict(query.index, last.var.index, last.value)[1];
}

NextVariableDistribution RiskMinimizerModel::next_variable(const PromptState&) const {
  throw Error(Errc::unsupported_operation, "the risk-minimizer backend does not choose variables");
}

}  // namespace locality_lab
