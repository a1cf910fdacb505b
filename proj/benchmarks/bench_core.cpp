#include <benchmark/benchmark.h>

#include "locality_lab/error.hpp"
#include "locality_lab/estimators.hpp"
#include "locality_lab/graph.hpp"
#include "locality_lab/infer.hpp"
#include "locality_lab/model.hpp"
#include "locality_lab/obsdist.hpp"
#include "locality_lab/pipeline.hpp"
#include "locality_lab/theory.hpp"

namespace ll = locality_lab;

namespace {

ll::BayesNet make_net(std::size_t n, std::uint64_t seed) {
  ll::Rng rng(seed);
  const ll::Dag dag = ll::generate_dag(n, n, rng);
  return ll::assign_cpts(dag, 0.2, 0.2, rng);
}

// First non-adjacent pair with a nonempty separator.
ll::Query far_query(const ll::Dag& dag) {
  for (std::uint32_t a = 0; a < dag.size(); ++a) {
    for (std::uint32_t b = dag.size(); b-- > a + 1;) {
      const ll::Query q{ll::VariableId{a}, 1, ll::VariableId{b}, 1};
      try {
        if (!ll::build_scaffold(dag, q).empty()) return q;
      } catch (const ll::Error&) {
      }
    }
  }
  return {ll::VariableId{0}, 1, ll::VariableId{1}, 1};
}

void BM_conditional(benchmark::State& state) {
  const auto net = make_net(static_cast<std::size_t>(state.range(0)), 1);
  const ll::Assignment evidence{{ll::VariableId{0}, 1}};
  const ll::VariableId target{static_cast<std::uint32_t>(net.size() - 1)};
  for (auto _ : state) benchmark::DoNotOptimize(ll::conditional(net, target, 1, evidence));
}
BENCHMARK(BM_conditional)->Arg(10)->Arg(20)->Arg(50)->Arg(100);

void BM_minimal_d_separator(benchmark::State& state) {
  const auto net = make_net(static_cast<std::size_t>(state.range(0)), 2);
  const ll::Query q = far_query(net.dag());
  for (auto _ : state) benchmark::DoNotOptimize(ll::minimal_d_separator(net.dag(), q.observed, q.target));
}
BENCHMARK(BM_minimal_d_separator)->Arg(20)->Arg(100);

void BM_corpus(benchmark::State& state) {
  const auto net = make_net(20, 3);
  const auto spec = ll::make_observation_spec(ll::ObservationMode::local, net.dag(), ll::RadiusKind::geometric,
                                              0.5, 0.2, {});
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ll::generate_corpus(net, spec, 10000, ++seed, 1));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_corpus)->Unit(benchmark::kMillisecond);

void BM_scaffolded_empirical(benchmark::State& state) {
  const auto net = make_net(20, 4);
  const auto spec = ll::make_observation_spec(ll::ObservationMode::local, net.dag(), ll::RadiusKind::geometric,
                                              0.5, 0.2, {});
  const auto model = ll::fit_empirical(ll::generate_corpus(net, spec, 20000, 5, 1), net.size());
  const ll::Query q = far_query(net.dag());
  const auto plan = ll::build_scaffold(net.dag(), q);
  ll::Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(ll::scaffolded(model, q, plan, 10, rng).value);
}
BENCHMARK(BM_scaffolded_empirical);

void BM_gap_check(benchmark::State& state) {
  ll::Rng rng(7);
  const auto chain = ll::random_chain(10, static_cast<std::size_t>(state.range(0)), rng, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ll::gap_check(chain, ll::Formulation::uniform_mixture).holds);
  }
}
BENCHMARK(BM_gap_check)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
