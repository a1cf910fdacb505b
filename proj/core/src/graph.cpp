#include "locality_lab/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <queue>

#include "locality_lab/error.hpp"

namespace locality_lab {

std::string format_variable(VariableId id) { return "X" + std::to_string(id.index); }

std::optional<VariableId> try_parse_variable(std::string_view text) {
  if (text.size() < 2 || text.front() != 'X') return std::nullopt;
  const std::string_view digits = text.substr(1);
  if (digits.size() > 1 && digits.front() == '0') return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return VariableId{value};
}

VariableId parse_variable(std::string_view text) {
  if (auto id = try_parse_variable(text)) return *id;
  throw Error(Errc::parse_error, "not a variable name: '" + std::string(text) + "'");
}

// --- Dag -------------------------------------------------------------------

Dag::Dag(std::size_t n_nodes) : parents_(n_nodes), children_(n_nodes) {}

bool Dag::has_edge(VariableId parent, VariableId child) const {
  const auto& kids = children_[parent.index];
  return std::binary_search(kids.begin(), kids.end(), child);
}

bool Dag::adjacent(VariableId a, VariableId b) const { return has_edge(a, b) || has_edge(b, a); }

bool Dag::reaches(VariableId from, VariableId to) const {
  if (from == to) return true;
  std::vector<char> seen(size(), 0);
  std::vector<VariableId> stack{from};
  seen[from.index] = 1;
  while (!stack.empty()) {
    const VariableId v = stack.back();
    stack.pop_back();
    for (VariableId c : children_[v.index]) {
      if (c == to) return true;
      if (!seen[c.index]) {
        seen[c.index] = 1;
        stack.push_back(c);
      }
    }
  }
  return false;
}

bool Dag::would_create_cycle(VariableId parent, VariableId child) const {
  return reaches(child, parent);
}

void Dag::add_edge(VariableId parent, VariableId child) {
  if (!contains(parent) || !contains(child)) {
    throw Error(Errc::invalid_argument, "edge endpoint out of range");
  }
  if (parent == child) throw Error(Errc::invalid_argument, "self-loop on " + format_variable(parent));
  if (has_edge(parent, child)) {
    throw Error(Errc::invalid_argument,
                "duplicate edge " + format_variable(parent) + "->" + format_variable(child));
  }
  if (would_create_cycle(parent, child)) {
    throw Error(Errc::cycle_detected,
                "edge " + format_variable(parent) + "->" + format_variable(child) + " closes a cycle");
  }
  auto& kids = children_[parent.index];
  kids.insert(std::upper_bound(kids.begin(), kids.end(), child), child);
  auto& pars = parents_[child.index];
  pars.insert(std::upper_bound(pars.begin(), pars.end(), parent), parent);
  ++n_edges_;
}

std::vector<Edge> Dag::edges() const {
  std::vector<Edge> out;
  out.reserve(n_edges_);
  for (std::uint32_t p = 0; p < size(); ++p) {
    for (VariableId c : children_[p]) out.emplace_back(VariableId{p}, c);
  }
  return out;
}

// --- Cpt / BayesNet --------------------------------------------------------

std::uint32_t Cpt::config_of(const World& world) const {
  std::uint32_t config = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    config |= static_cast<std::uint32_t>(world[parents[k].index] & 1U) << k;
  }
  return config;
}

BayesNet::BayesNet(Dag dag, std::vector<Cpt> cpts) : dag_(std::move(dag)), cpts_(std::move(cpts)) {
  if (cpts_.size() != dag_.size()) {
    throw Error(Errc::invalid_argument, "need exactly one CPT per node");
  }
  for (std::uint32_t v = 0; v < dag_.size(); ++v) {
    const Cpt& cpt = cpts_[v];
    const auto pars = dag_.parents(VariableId{v});
    if (cpt.owner != VariableId{v}) {
      throw Error(Errc::invalid_argument, "CPT " + std::to_string(v) + " has wrong owner");
    }
    if (!std::equal(pars.begin(), pars.end(), cpt.parents.begin(), cpt.parents.end())) {
      throw Error(Errc::invalid_argument,
                  "CPT parents of " + format_variable(cpt.owner) + " do not match the DAG");
    }
    if (cpt.parents.size() >= 31 || cpt.table.size() != (std::size_t{1} << cpt.parents.size())) {
      throw Error(Errc::invalid_argument,
                  "CPT of " + format_variable(cpt.owner) + " must have 2^|parents| entries");
    }
    for (double p : cpt.table) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(Errc::invalid_argument,
                    "CPT entry outside [0,1] for " + format_variable(cpt.owner));
      }
    }
  }
  order_ = topological_order(dag_);
}

// --- Generation ------------------------------------------------------------

Dag generate_dag(std::size_t n_nodes, std::size_t n_edges, Rng& rng) {
  const std::size_t max_edges = n_nodes < 2 ? 0 : n_nodes * (n_nodes - 1) / 2;
  if (n_edges > max_edges) {
    throw Error(Errc::infeasible_edge_count,
                std::to_string(n_edges) + " edges requested but a DAG on " +
                    std::to_string(n_nodes) + " nodes holds at most " + std::to_string(max_edges));
  }
  Dag dag(n_nodes);
  for (std::size_t e = 0; e < n_edges; ++e) {
    std::size_t rejections = 0;
    while (true) {
      const auto a = static_cast<std::uint32_t>(rng.below(n_nodes));
      auto b = static_cast<std::uint32_t>(rng.below(n_nodes - 1));
      if (b >= a) ++b;  // distinct ordered pair
      const VariableId parent{a}, child{b};
      if (!dag.has_edge(parent, child) && !dag.would_create_cycle(parent, child)) {
        dag.add_edge(parent, child);
        break;
      }
      if (++rejections >= kMaxConsecutiveEdgeRejections) {
        throw Error(Errc::generation_stuck,
                    "no acceptable edge after " + std::to_string(rejections) + " draws (edge " +
                        std::to_string(e + 1) + " of " + std::to_string(n_edges) + ")");
      }
    }
  }
  return dag;
}

std::vector<VariableId> topological_order(const Dag& dag) {
  const std::size_t n = dag.size();
  std::vector<std::size_t> indegree(n);
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  for (std::uint32_t v = 0; v < n; ++v) {
    indegree[v] = dag.parents(VariableId{v}).size();
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<VariableId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::uint32_t v = ready.top();
    ready.pop();
    order.push_back(VariableId{v});
    for (VariableId c : dag.children(VariableId{v})) {
      if (--indegree[c.index] == 0) ready.push(c.index);
    }
  }
  if (order.size() != n) throw Error(Errc::cycle_detected, "graph has a directed cycle");
  return order;
}

double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw Error(Errc::invalid_argument, "gamma shape must be positive");
  // Shapes below one are boosted: G(a) = G(a + 1) * U^(1/a).
  double log_boost = 0.0;
  if (shape < 1.0) {
    log_boost = std::log(rng.uniform_open()) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 ||
        std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return std::log(d) + std::log(v) + log_boost;
    }
  }
}

double sample_beta(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw Error(Errc::invalid_argument, "beta parameters must be positive");
  }
  const double log_x = sample_log_gamma(alpha, rng);
  const double log_y = sample_log_gamma(beta, rng);
  // x / (x + y) = 1 / (1 + exp(log_y - log_x)), stable for tiny gammas.
  return 1.0 / (1.0 + std::exp(log_y - log_x));
}

BayesNet assign_cpts(const Dag& dag, double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw Error(Errc::invalid_argument, "beta parameters must be positive");
  }
  std::vector<Cpt> cpts(dag.size());
  for (VariableId v : topological_order(dag)) {
    Cpt& cpt = cpts[v.index];
    cpt.owner = v;
    const auto pars = dag.parents(v);
    cpt.parents.assign(pars.begin(), pars.end());
    cpt.table.resize(std::size_t{1} << cpt.parents.size());
    for (double& p : cpt.table) p = sample_beta(alpha, beta, rng);
  }
  return BayesNet(dag, std::move(cpts));
}

World ancestral_sample(const BayesNet& net, Rng& rng) {
  World world(net.size(), 0);
  for (VariableId v : net.order()) {
    const Cpt& cpt = net.cpt(v);
    world[v.index] = rng.uniform() < cpt.p1(cpt.config_of(world)) ? 1 : 0;
  }
  return world;
}

// --- Undirected queries ----------------------------------------------------

std::vector<int> undirected_distances(const Dag& dag, VariableId source) {
  std::vector<int> dist(dag.size(), -1);
  std::deque<VariableId> queue{source};
  dist[source.index] = 0;
  while (!queue.empty()) {
    const VariableId v = queue.front();
    queue.pop_front();
    auto visit = [&](VariableId w) {
      if (dist[w.index] < 0) {
        dist[w.index] = dist[v.index] + 1;
        queue.push_back(w);
      }
    };
    for (VariableId p : dag.parents(v)) visit(p);
    for (VariableId c : dag.children(v)) visit(c);
  }
  return dist;
}

std::vector<VariableId> undirected_neighborhood(const Dag& dag, VariableId center, std::size_t k) {
  const auto dist = undirected_distances(dag, center);
  std::vector<VariableId> out;
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    if (dist[v] >= 0 && static_cast<std::size_t>(dist[v]) <= k) out.push_back(VariableId{v});
  }
  return out;
}

std::size_t undirected_diameter(const Dag& dag) {
  std::size_t best = 0;
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    for (int d : undirected_distances(dag, VariableId{v})) {
      if (d > 0) best = std::max(best, static_cast<std::size_t>(d));
    }
  }
  return best;
}

}  // namespace locality_lab
