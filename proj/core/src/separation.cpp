#include <algorithm>
#include <deque>
#include <limits>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"

namespace locality_lab {

std::vector<char> ancestral_closure(const Dag& dag, std::span<const VariableId> seeds) {
  std::vector<char> mark(dag.size(), 0);
  std::vector<VariableId> stack;
  for (VariableId s : seeds) {
    if (!mark[s.index]) {
      mark[s.index] = 1;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const VariableId v = stack.back();
    stack.pop_back();
    for (VariableId p : dag.parents(v)) {
      if (!mark[p.index]) {
        mark[p.index] = 1;
        stack.push_back(p);
      }
    }
  }
  return mark;
}

std::vector<char> active_reachable(const Dag& dag, VariableId source,
                                   std::span<const VariableId> given) {
  const std::size_t n = dag.size();
  std::vector<char> observed(n, 0);
  for (VariableId g : given) observed[g.index] = 1;
  // A collider is open iff it is in, or is an ancestor of, the given set.
  const auto opens_collider = ancestral_closure(dag, given);

  enum Dir : int { kFromChild = 0, kFromParent = 1 };
  std::vector<char> visited(2 * n, 0);
  std::vector<char> reachable(n, 0);
  std::deque<std::pair<VariableId, Dir>> queue{{source, kFromChild}};

  while (!queue.empty()) {
    const auto [v, dir] = queue.front();
    queue.pop_front();
    char& seen = visited[2 * v.index + dir];
    if (seen) continue;
    seen = 1;
    if (!observed[v.index]) reachable[v.index] = 1;

    if (dir == kFromChild && !observed[v.index]) {
      for (VariableId p : dag.parents(v)) queue.emplace_back(p, kFromChild);
      for (VariableId c : dag.children(v)) queue.emplace_back(c, kFromParent);
    } else if (dir == kFromParent) {
      if (!observed[v.index]) {
        for (VariableId c : dag.children(v)) queue.emplace_back(c, kFromParent);
      }
      if (opens_collider[v.index]) {
        for (VariableId p : dag.parents(v)) queue.emplace_back(p, kFromChild);
      }
    }
  }
  reachable[source.index] = 0;
  return reachable;
}

bool d_separated(const Dag& dag, VariableId a, VariableId b, std::span<const VariableId> given) {
  if (!dag.contains(a) || !dag.contains(b)) throw Error(Errc::invalid_argument, "variable out of range");
  if (a == b) throw Error(Errc::invalid_argument, "d-separation needs two distinct variables");
  for (VariableId g : given) {
    if (g == a || g == b) {
      throw Error(Errc::invalid_argument, "endpoints must not be in the conditioning set");
    }
  }
  return !active_reachable(dag, a, given)[b.index];
}

namespace {

// Edmonds-Karp on a small dense-ish network; capacities are tiny integers.
class FlowNetwork {
 public:
  static constexpr int kInfinite = std::numeric_limits<int>::max() / 4;

  explicit FlowNetwork(std::size_t nodes) : adjacency_(nodes) {}

  void add_edge(std::size_t from, std::size_t to, int capacity) {
    adjacency_[from].push_back(arcs_.size());
    arcs_.push_back({to, capacity});
    adjacency_[to].push_back(arcs_.size());
    arcs_.push_back({from, 0});
  }

  int max_flow(std::size_t source, std::size_t sink) {
    int flow = 0;
    std::vector<std::size_t> via(adjacency_.size());
    while (true) {
      std::vector<char> seen(adjacency_.size(), 0);
      std::deque<std::size_t> queue{source};
      seen[source] = 1;
      while (!queue.empty() && !seen[sink]) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t id : adjacency_[u]) {
          const Arc& arc = arcs_[id];
          if (arc.capacity > 0 && !seen[arc.to]) {
            seen[arc.to] = 1;
            via[arc.to] = id;
            queue.push_back(arc.to);
          }
        }
      }
      if (!seen[sink]) return flow;
      int bottleneck = kInfinite;
      for (std::size_t v = sink; v != source; v = arcs_[via[v] ^ 1].to) {
        bottleneck = std::min(bottleneck, arcs_[via[v]].capacity);
      }
      if (bottleneck >= kInfinite) return kInfinite;  // no finite cut
      for (std::size_t v = sink; v != source; v = arcs_[via[v] ^ 1].to) {
        arcs_[via[v]].capacity -= bottleneck;
        arcs_[via[v] ^ 1].capacity += bottleneck;
      }
      flow += bottleneck;
    }
  }

 private:
  struct Arc {
    std::size_t to;
    int capacity;
  };
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<Arc> arcs_;
};

struct MoralGraph {
  std::vector<VariableId> nodes;                      // ascending
  std::vector<std::vector<std::size_t>> neighbours;   // by position in nodes
};

MoralGraph moral_ancestral_graph(const Dag& dag, VariableId a, VariableId b) {
  const VariableId seeds[] = {a, b};
  const auto in_closure = ancestral_closure(dag, seeds);
  MoralGraph g;
  std::vector<std::size_t> position(dag.size(), 0);
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    if (in_closure[v]) {
      position[v] = g.nodes.size();
      g.nodes.push_back(VariableId{v});
    }
  }
  g.neighbours.resize(g.nodes.size());
  auto link = [&](VariableId x, VariableId y) {
    g.neighbours[position[x.index]].push_back(position[y.index]);
    g.neighbours[position[y.index]].push_back(position[x.index]);
  };
  for (VariableId v : g.nodes) {
    const auto pars = dag.parents(v);
    for (std::size_t i = 0; i < pars.size(); ++i) {
      link(pars[i], v);
      for (std::size_t j = i + 1; j < pars.size(); ++j) link(pars[i], pars[j]);
    }
  }
  for (auto& nb : g.neighbours) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return g;
}

// Minimum number of vertices (excluding s and t) whose removal, together
// with the `removed` vertices, disconnects s from t.
int vertex_cut_size(const MoralGraph& g, std::size_t s, std::size_t t,
                    const std::vector<char>& removed) {
  const std::size_t m = g.nodes.size();
  FlowNetwork net(2 * m);  // node i: in = 2i, out = 2i + 1
  for (std::size_t i = 0; i < m; ++i) {
    if (removed[i]) continue;
    const int cap = (i == s || i == t) ? FlowNetwork::kInfinite : 1;
    net.add_edge(2 * i, 2 * i + 1, cap);
    for (std::size_t j : g.neighbours[i]) {
      if (!removed[j]) net.add_edge(2 * i + 1, 2 * j, FlowNetwork::kInfinite);
    }
  }
  return net.max_flow(2 * s + 1, 2 * t);
}

}  // namespace

std::vector<VariableId> minimal_d_separator(const Dag& dag, VariableId a, VariableId b) {
  if (!dag.contains(a) || !dag.contains(b) || a == b) {
    throw Error(Errc::invalid_argument, "need two distinct in-range variables");
  }
  if (dag.adjacent(a, b)) {
    throw Error(Errc::non_separable,
                format_variable(a) + " and " + format_variable(b) + " are adjacent");
  }
  const MoralGraph g = moral_ancestral_graph(dag, a, b);
  const auto pos = [&](VariableId v) {
    return static_cast<std::size_t>(std::lower_bound(g.nodes.begin(), g.nodes.end(), v) - g.nodes.begin());
  };
  const std::size_t s = pos(a), t = pos(b);
  std::vector<char> removed(g.nodes.size(), 0);
  const int k = vertex_cut_size(g, s, t, removed);
  if (k >= FlowNetwork::kInfinite) {
    throw Error(Errc::non_separable, "no finite vertex cut between the pair");
  }

  // Greedy lexicographic choice: v joins the answer iff some minimum cut of
  // the remaining graph contains it, i.e. deleting v lowers the cut by one.
  std::vector<VariableId> chosen;
  for (std::size_t i = 0; i < g.nodes.size() && static_cast<int>(chosen.size()) < k; ++i) {
    if (i == s || i == t) continue;
    removed[i] = 1;
    if (vertex_cut_size(g, s, t, removed) == k - static_cast<int>(chosen.size()) - 1) {
      chosen.push_back(g.nodes[i]);
    } else {
      removed[i] = 0;
    }
  }
  return chosen;
}

}  // namespace locality_lab
