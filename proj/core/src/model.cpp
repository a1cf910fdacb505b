#include "locality_lab/model.hpp"

#include <algorithm>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"

namespace locality_lab {

namespace {

void check_query(const PromptState& state, VariableId query, std::size_t n_nodes) {
  validate_state(state, n_nodes);
  if (query.index >= n_nodes) throw Error(Errc::unknown_variable, format_variable(query));
  for (const auto& obs : state.context) {
    if (obs.var == query) {
      throw Error(Errc::invalid_argument, format_variable(query) + " is already in the context");
    }
  }
}

std::string cache_key(VariableId query, Assignment context) {
  std::sort(context.begin(), context.end(),
            [](const Observation& l, const Observation& r) { return l.var < r.var; });
  std::string key = std::to_string(query.index);
  for (const auto& o : context) {
    key += ',';
    key += std::to_string(o.var.index);
    key += '=';
    key += static_cast<char>('0' + o.value);
  }
  return key;
}

}  // namespace

void validate_state(const PromptState& state, std::size_t n_nodes) {
  if (state.target.index >= n_nodes) throw Error(Errc::unknown_variable, format_variable(state.target));
  std::vector<VariableId> seen;
  seen.reserve(state.context.size());
  for (const auto& obs : state.context) {
    if (obs.var.index >= n_nodes) throw Error(Errc::unknown_variable, format_variable(obs.var));
    if (obs.value > 1) throw Error(Errc::invalid_argument, "context values must be bits");
    if (obs.var == state.target) {
      throw Error(Errc::invalid_argument, "target " + format_variable(obs.var) + " appears in the context");
    }
    seen.push_back(obs.var);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(Errc::invalid_argument, "context repeats a variable");
  }
}

std::string render_prompt(const PromptState& state, VariableId query) {
  std::string out = "###\ntarget: " + format_variable(state.target) + "\n";
  for (const auto& obs : state.context) {
    out += format_variable(obs.var) + "=" + static_cast<char>('0' + obs.value) + "\n";
  }
  out += format_variable(query) + "=";
  return out;
}

double OracleModel::value_p1(const PromptState& state, VariableId query) const {
  check_query(state, query, net_.size());
  std::string key = cache_key(query, state.context);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double p = conditional(net_, query, 1, state.context);
  std::lock_guard lock(mutex_);
  cache_.emplace(std::move(key), p);
  return p;
}

NextVariableDistribution OracleModel::next_variable(const PromptState&) const {
  throw Error(Errc::unsupported_operation, "the oracle backend does not choose variables");
}

EmpiricalBackoffModel::EmpiricalBackoffModel(std::size_t n_nodes, double alpha, double tau)
    : n_(n_nodes),
      alpha_(alpha),
      tau_(tau),
      pairs_(n_nodes * n_nodes * 4, 0),
      bigram_(n_nodes * n_nodes, 0),
      unigram_(n_nodes, 0),
      values_(2 * n_nodes, 0) {
  if (!(alpha >= 0.0)) throw Error(Errc::invalid_argument, "alpha must be nonnegative");
  if (!(tau >= 0.0)) throw Error(Errc::invalid_argument, "tau must be nonnegative");
}

void EmpiricalBackoffModel::add(const Sample& sample) {
  for (const auto& r : sample.records) {
    if (r.var.index >= n_) throw Error(Errc::unknown_variable, format_variable(r.var));
  }
  ++samples_;
  const auto& recs = sample.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto a = recs[i].var.index;
    ++unigram_[a];
    ++values_[2 * a + recs[i].value];
    if (i + 1 < recs.size()) ++bigram_[a * n_ + recs[i + 1].var.index];
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      const auto b = recs[j].var.index;
      ++pairs_[(a * n_ + b) * 4 + 2 * recs[i].value + recs[j].value];
      ++pairs_[(b * n_ + a) * 4 + 2 * recs[j].value + recs[i].value];
    }
  }
}

std::size_t EmpiricalBackoffModel::pair_count(VariableId a, Bit va, VariableId b, Bit vb) const {
  return pairs_[(a.index * n_ + b.index) * 4 + 2 * va + vb];
}

std::size_t EmpiricalBackoffModel::pair_count(VariableId a, VariableId b) const {
  const std::size_t base = (a.index * n_ + b.index) * 4;
  return pairs_[base] + pairs_[base + 1] + pairs_[base + 2] + pairs_[base + 3];
}

double EmpiricalBackoffModel::marginal_p1(VariableId v) const {
  const double ones = static_cast<double>(values_[2 * v.index + 1]);
  const double total = ones + static_cast<double>(values_[2 * v.index]);
  if (total + 2 * alpha_ == 0.0) return 0.5;
  return (ones + alpha_) / (total + 2 * alpha_);
}

double EmpiricalBackoffModel::value_p1(const PromptState& state, VariableId query) const {
  check_query(state, query, n_);
  if (state.context.empty()) return marginal_p1(query);
  const Observation& last = state.context.back();
  if (static_cast<double>(pair_count(query, last.var)) < tau_ || pair_count(query, last.var) == 0) {
    return marginal_p1(query);
  }
  const double ones = static_cast<double>(pair_count(query, 1, last.var, last.value));
  const double total = ones + static_cast<double>(pair_count(query, 0, last.var, last.value));
  if (total + 2 * alpha_ == 0.0) return marginal_p1(query);
  return (ones + alpha_) / (total + 2 * alpha_);
}

NextVariableDistribution EmpiricalBackoffModel::next_variable(const PromptState& state) const {
  validate_state(state, n_);
  std::vector<char> used(n_, 0);
  for (const auto& obs : state.context) used[obs.var.index] = 1;
  NextVariableDistribution dist;
  double total = 0.0;
  for (std::uint32_t v = 0; v < n_; ++v) {
    if (used[v]) continue;
    const double count = state.context.empty()
                             ? static_cast<double>(unigram_[v])
                             : static_cast<double>(bigram_[state.context.back().var.index * n_ + v]);
    dist.emplace_back(VariableId{v}, count + alpha_);
    total += count + alpha_;
  }
  if (dist.empty()) throw Error(Errc::invalid_argument, "no candidate variables remain");
  for (auto& [v, p] : dist) p = total > 0.0 ? p / total : 1.0 / static_cast<double>(dist.size());
  return dist;
}

EmpiricalBackoffModel fit_empirical(std::span<const Sample> corpus, std::size_t n_nodes,
                                    double alpha, double tau) {
  EmpiricalBackoffModel model(n_nodes, alpha, tau);
  for (const auto& s : corpus) model.add(s);
  return model;
}

EmpiricalBackoffModel fit_empirical(std::istream& corpus, std::size_t n_nodes, double alpha,
                                    double tau, std::size_t max_characters) {
  EmpiricalBackoffModel model(n_nodes, alpha, tau);
  CorpusReader reader(corpus);
  while (auto sample = reader.next()) {
    if (max_characters > 0 && reader.characters() > max_characters) break;
    model.add(*sample);
  }
  return model;
}

}  // namespace locality_lab
