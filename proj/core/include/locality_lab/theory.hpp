#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/model.hpp"
#include "locality_lab/rng.hpp"

namespace locality_lab {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

using Distribution = std::vector<double>;

/// Markov chain Y_0 -> Y_1 -> ... -> Y_{n-1} over values {0, ..., arity-1}.
/// transitions[k](a, b) = p(Y_{k+1} = b | Y_k = a).
struct ChainModel {
  std::size_t n = 0;
  std::size_t arity = 0;
  Distribution initial;
  std::vector<Matrix> transitions;

  /// Row sums within 1e-12 of one, entries nonnegative, shapes consistent.
  void validate() const;
  bool doubly_stochastic(double tol = 1e-9) const;
};

inline constexpr std::size_t kMaxSinkhornIterations = 10'000;

/// Alternating row/column normalization until both sums are within `tol`
/// of one. Throws sinkhorn_no_convergence after kMaxSinkhornIterations.
Matrix sinkhorn(Matrix m, double tol = 1e-12);

/// Dirichlet(1, ..., 1) rows. With doubly_stochastic each matrix is
/// Sinkhorn-balanced and the initial distribution is uniform.
ChainModel random_chain(std::size_t n, std::size_t arity, Rng& rng, bool doubly_stochastic);

/// p(Y_i).
Distribution chain_marginal(const ChainModel& chain, std::size_t i);
/// p(Y_i | Y_j = y_j) for i > j.
Distribution chain_conditional(const ChainModel& chain, std::size_t i, std::size_t j, std::size_t y_j);
/// p(Y_j | Y_{j+1} = y) by Bayes' rule; uniform when p(Y_{j+1} = y) = 0.
Distribution chain_backward(const ChainModel& chain, std::size_t j, std::size_t y);

/// Minimizer of a1 H(p1, q) + a2 H(p2, q): (a1 p1 + a2 p2) / (a1 + a2).
Distribution mixture_minimizer(std::span<const double> p1, std::span<const double> p2, double a1,
                               double a2);

/// a1 H(p1, q) + a2 H(p2, q) in nats (infinite when q misses mass).
double weighted_cross_entropy(std::span<const double> p1, std::span<const double> p2, double a1,
                              double a2, std::span<const double> q);

double kl_divergence(std::span<const double> p, std::span<const double> q);

enum class Formulation { marginal_mixture, uniform_mixture };

std::string_view to_string(Formulation f) noexcept;
Formulation parse_formulation(std::string_view text);

/// Value-prediction model over two-variable sequences (i1, v1, i2, v2) on
/// a chain: first[i1] = q(v1 | i1) and cond = q(v2 | i1, v1, i2).
struct PairModel {
  std::size_t n = 0;
  std::size_t arity = 0;
  std::vector<Distribution> first;
  std::vector<double> cond;  // [((i1 * n + i2) * arity + v1) * arity + v2]

  PairModel() = default;
  PairModel(std::size_t n_, std::size_t arity_);
  std::span<double> row(std::size_t i1, std::size_t v1, std::size_t i2) {
    return {cond.data() + ((i1 * n + i2) * arity + v1) * arity, arity};
  }
  std::span<const double> row(std::size_t i1, std::size_t v1, std::size_t i2) const {
    return {cond.data() + ((i1 * n + i2) * arity + v1) * arity, arity};
  }
};

/// Closed-form risk minimizer q* for a chain.
///
/// marginal_mixture: training pairs are adjacent variables and the minimizer
///   mixes conditional and marginal half and half; any non-adjacent pair is
///   predicted by the marginal.
/// uniform_mixture: risk H(p_obs, q) + w H(u, q), p_obs uniform over the
///   n-1 forward adjacent index pairs, u uniform over (i1, v1, i2, v2) with
///   i1 != i2. Forward adjacent rows are lambda/K + (1 - lambda) p(Y_{i+1}|Y_i = v)
///   with lambda = u_w / (u_w + p_w), p_w = p(Y_i = v)/(n-1) and
///   u_w = w / (n (n-1) K); every other context is predicted uniformly.
struct RiskMinimizer {
  Formulation formulation = Formulation::marginal_mixture;
  double uniform_weight = 0.0;
  std::size_t n = 0;
  std::size_t arity = 0;
  std::vector<Matrix> adjacent;               // q*(Y_{k+1} | Y_k) per edge
  std::vector<Distribution> lambdas;          // [edge][v]: weight on the baseline
  std::vector<Distribution> marginals;        // p(Y_i)
  std::vector<Distribution> backward_rows;    // [edge * arity + v]: q*(Y_k | Y_{k+1} = v)
  std::vector<Distribution> first;            // q*(v1 | i1)

  /// q*(Y_i | Y_j = y_j), i != j.
  Distribution predict(std::size_t i, std::size_t j, std::size_t y_j) const;
  /// Prediction for a non-adjacent pair: p(Y_i) or uniform.
  Distribution baseline(std::size_t i) const;
  /// Full table over every context the risk can weight.
  PairModel table() const;
};

RiskMinimizer risk_minimizer(const ChainModel& chain, Formulation formulation,
                             double uniform_weight = 1.0);

/// H(p_obs, q) + w H(u, q) over value tokens, as described on RiskMinimizer.
/// Throws log_of_zero when q gives zero probability to a weighted outcome.
double risk(const ChainModel& chain, const PairModel& q, double uniform_weight);

/// Exact E[scaffolded estimate of Y_i | Y_j = y_j] when every intermediate
/// Y_{j+1} .. Y_{i-1} is sampled from q*; i > j + 1.
Distribution scaffolded_expectation(const RiskMinimizer& q, std::size_t i, std::size_t j, std::size_t y_j);

enum class GapStatus { holds, violated, vacuous };
std::string_view to_string(GapStatus s) noexcept;

inline constexpr double kVacuousBias = 1e-9;

struct GapRow {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t y_i = 0;
  std::size_t y_j = 0;
  double direct_bias2 = 0.0;
  double scaffolded_bias2 = 0.0;
  double ratio = 0.0;               // scaffolded / direct (NaN when vacuous)
  double conditional_weight = 0.0;  // product of (1 - lambda) along the scaffold
  GapStatus status = GapStatus::vacuous;
};

struct GapReport {
  Formulation formulation = Formulation::marginal_mixture;
  std::vector<GapRow> rows;
  std::size_t holds = 0;
  std::size_t violated = 0;
  std::size_t vacuous = 0;
};

/// Squared bias of direct (baseline) and scaffolded prediction for every
/// non-adjacent forward query. Throws assumption_violated when
/// uniform_mixture is asked of a chain that is not doubly stochastic with a
/// uniform initial distribution.
GapReport gap_check(const ChainModel& chain, Formulation formulation, double uniform_weight = 1.0);

struct KlRow {
  std::size_t edge = 0;
  std::size_t value = 0;
  double kl_minimizer = 0.0;  // KL(p(Y_{k+1}|Y_k=v) || q*)
  double kl_marginal = 0.0;   // KL(p(Y_{k+1}|Y_k=v) || p(Y_{k+1}))
  bool holds = true;
};

/// Under marginal_mixture, q* is at least as close in KL to each true
/// adjacent conditional as the marginal is (1e-12 slack).
std::vector<KlRow> kl_gap_check(const ChainModel& chain);

/// Binary chain exposed as a sequence model: variable X<i> is Y_i. Value
/// predictions use q* given the last context record (first-value q* when the
/// context is empty).
class RiskMinimizerModel final : public SequenceModel {
 public:
  explicit RiskMinimizerModel(RiskMinimizer q);

  std::string_view name() const override { return "risk_minimizer"; }
  std::size_t n_nodes() const override { return q_.n; }
  double value_p1(const PromptState& state, VariableId query) const override;
  NextVariableDistribution next_variable(const PromptState& state) const override;

 private:
  RiskMinimizer q_;
};

}  // namespace locality_lab
