#pragma once

#include <istream>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "locality_lab/graph.hpp"
#include "locality_lab/pipeline.hpp"

namespace locality_lab {

/// A prompt: the declared target plus the records emitted so far.
struct PromptState {
  VariableId target;
  Assignment context;
};

/// Throws invalid_argument on repeated context variables or a target that
/// already appears in the context, unknown_variable on ids >= n_nodes.
void validate_state(const PromptState& state, std::size_t n_nodes);

/// Text a language model would see when asked for the value of `query`:
/// "###\ntarget: X2\nX1=0\nX2=".
std::string render_prompt(const PromptState& state, VariableId query);

/// (variable, probability) sorted by variable; sums to one.
using NextVariableDistribution = std::vector<std::pair<VariableId, double>>;

/// Autoregressive conditional model q over sample records. Implementations
/// must be safe to call concurrently.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t n_nodes() const = 0;

  /// q(query = 1 | state). query must not be in the context.
  virtual double value_p1(const PromptState& state, VariableId query) const = 0;

  /// Distribution of the next emitted variable id; support is every variable
  /// not yet in the context (the target included).
  virtual NextVariableDistribution next_variable(const PromptState& state) const = 0;
};

/// Exact conditionals from the data net. next_variable is unsupported.
class OracleModel final : public SequenceModel {
 public:
  explicit OracleModel(const BayesNet& net) : net_(net) {}

  std::string_view name() const override { return "oracle"; }
  std::size_t n_nodes() const override { return net_.size(); }
  double value_p1(const PromptState& state, VariableId query) const override;
  NextVariableDistribution next_variable(const PromptState& state) const override;

 private:
  const BayesNet& net_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, double> cache_;
};

/// Count-based reference learner. Value queries condition on the last
/// context record when the query has co-occurred with it at least tau times,
/// else fall back to the query's marginal frequency. Next-variable queries
/// follow identifier bigrams out of the last record.
class EmpiricalBackoffModel final : public SequenceModel {
 public:
  EmpiricalBackoffModel(std::size_t n_nodes, double alpha = 1.0, double tau = 50.0);

  void add(const Sample& sample);

  std::string_view name() const override { return "empirical"; }
  std::size_t n_nodes() const override { return n_; }
  double value_p1(const PromptState& state, VariableId query) const override;
  NextVariableDistribution next_variable(const PromptState& state) const override;

  double alpha() const noexcept { return alpha_; }
  double tau() const noexcept { return tau_; }
  std::size_t samples() const noexcept { return samples_; }

  /// Samples in which a = va and b = vb both appear (symmetric in (a, b)).
  std::size_t pair_count(VariableId a, Bit va, VariableId b, Bit vb) const;
  /// Samples in which a and b both appear.
  std::size_t pair_count(VariableId a, VariableId b) const;
  /// Times the record for b immediately follows the record for a.
  std::size_t bigram_count(VariableId a, VariableId b) const { return bigram_[a.index * n_ + b.index]; }
  std::size_t unigram_count(VariableId a) const { return unigram_[a.index]; }
  std::size_t value_count(VariableId a, Bit v) const { return values_[2 * a.index + v]; }

  /// Smoothed (n(v=1) + alpha) / (n(v) + 2 alpha); 0.5 when unseen and alpha = 0.
  double marginal_p1(VariableId v) const;

  friend bool operator==(const EmpiricalBackoffModel& a, const EmpiricalBackoffModel& b) {
    return a.n_ == b.n_ && a.alpha_ == b.alpha_ && a.tau_ == b.tau_ && a.samples_ == b.samples_ &&
           a.pairs_ == b.pairs_ && a.bigram_ == b.bigram_ && a.unigram_ == b.unigram_ && a.values_ == b.values_;
  }

 private:
  std::size_t n_;
  double alpha_;
  double tau_;
  std::size_t samples_ = 0;
  std::vector<std::size_t> pairs_;    // [(a * n + b) * 4 + 2 * va + vb]
  std::vector<std::size_t> bigram_;   // [a * n + b]
  std::vector<std::size_t> unigram_;  // [a]
  std::vector<std::size_t> values_;   // [2 * a + v]
};

EmpiricalBackoffModel fit_empirical(std::span<const Sample> corpus, std::size_t n_nodes,
                                    double alpha = 1.0, double tau = 50.0);
/// Streams a serialized corpus. With max_characters > 0 only whole samples
/// whose cumulative serialized length stays within the budget are counted.
EmpiricalBackoffModel fit_empirical(std::istream& corpus, std::size_t n_nodes, double alpha = 1.0,
                                    double tau = 50.0, std::size_t max_characters = 0);

}  // namespace locality_lab
