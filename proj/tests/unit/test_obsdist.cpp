#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "locality_lab/error.hpp"
#include "locality_lab/obsdist.hpp"

using namespace locality_lab;

namespace {

VariableId X(std::uint32_t i) { return VariableId{i}; }

Dag chain(std::size_t n) {
  Dag d(n);
  for (std::uint32_t i = 0; i + 1 < n; ++i) d.add_edge(X(i), X(i + 1));
  return d;
}

}  // namespace

TEST_CASE("radius distributions") {
  Rng rng(4);
  const auto one = RadiusDistribution::geometric(1.0);
  for (int i = 0; i < 100; ++i) CHECK(sample_radius(one, rng) == 1);

  const auto geo = RadiusDistribution::geometric(0.5);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto k = sample_radius(geo, rng);
    REQUIRE(k >= 1);
    sum += double(k);
  }
  CHECK(std::abs(sum / 1e5 - 2.0) < 0.05);

  const auto zipf = RadiusDistribution::zipf(2.0, 20);
  double norm = 0;
  for (int k = 1; k <= 20; ++k) norm += 1.0 / (k * k);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto k = sample_radius(zipf, rng);
    REQUIRE(k <= 20);
    ones += k == 1;
  }
  CHECK(std::abs(ones / 1e5 - 1.0 / norm) < 0.01);

  CHECK_THROWS_AS(RadiusDistribution::geometric(0.0), Error);
  CHECK_THROWS_AS(RadiusDistribution::zipf(1.0, 5), Error);
}

TEST_CASE("local selection on a chain") {
  auto spec = make_observation_spec(ObservationMode::local, chain(5), RadiusKind::geometric, 1.0, 0.0, {});
  Rng rng(1);
  SelectionTrace trace;
  for (int i = 0; i < 200; ++i) {
    const auto sel = select_variables(spec, rng, &trace);
    CHECK(trace.radius == 1);
    std::vector<VariableId> expect;
    for (std::uint32_t v = 0; v < 5; ++v)
      if (std::abs(int(v) - int(trace.center.index)) <= 1) expect.push_back(X(v));
    CHECK(sel == expect);
  }
}

TEST_CASE("whole-graph radius without dropout selects everything") {
  Dag complete(5);
  for (std::uint32_t i = 0; i < 5; ++i)
    for (std::uint32_t j = i + 1; j < 5; ++j) complete.add_edge(X(i), X(j));
  const auto spec = make_observation_spec(ObservationMode::local, complete, RadiusKind::geometric, 0.5, 0.0, {});
  ObservationSpec full;
  full.mode = ObservationMode::fully_observed;
  full.n_nodes = 5;
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    CHECK(select_variables(spec, rng).size() == 5);
    CHECK(select_variables(full, rng).size() == 5);
  }
}

TEST_CASE("held-out pairs are split by a fair coin") {
  ObservationSpec spec;
  spec.mode = ObservationMode::fully_observed;
  spec.n_nodes = 4;
  spec.held_out = {HeldOutPair(X(2), X(1))};
  CHECK(spec.held_out[0].a == X(1));
  Rng rng(3);
  int kept_a = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto sel = select_variables(spec, rng);
    const bool a = std::count(sel.begin(), sel.end(), X(1)) > 0;
    const bool b = std::count(sel.begin(), sel.end(), X(2)) > 0;
    CHECK(a != b);
    kept_a += a;
  }
  CHECK(std::abs(kept_a / 1e4 - 0.5) < 0.02);
}

TEST_CASE("dropout rate and neighbourhood containment") {
  Rng g(5);
  const Dag dag = generate_dag(20, 20, g);
  const auto spec = make_observation_spec(ObservationMode::local, dag, RadiusKind::geometric, 0.5, 0.2,
                                          {HeldOutPair(X(0), X(7)), HeldOutPair(X(3), X(4))});
  Rng rng(6);
  std::size_t members = 0, dropped = 0;
  std::vector<std::vector<VariableId>> all;
  for (int i = 0; i < 100000; ++i) {
    SelectionTrace t;
    auto sel = select_variables(spec, rng, &t);
    members += t.neighbourhood_size;
    dropped += t.dropped;
    const auto hood = undirected_neighborhood(dag, t.center, t.radius);
    for (VariableId v : sel) REQUIRE(std::binary_search(hood.begin(), hood.end(), v));
    all.push_back(std::move(sel));
  }
  CHECK(std::abs(double(dropped) / double(members) - 0.2) < 0.01);
  CHECK(verify_exclusion(all, spec.held_out) == 0);
}

TEST_CASE("verify_exclusion counts violating sets") {
  const std::vector<std::vector<VariableId>> sets{{X(1), X(2)}, {X(1), X(3)}, {X(1), X(2), X(3)}};
  const std::vector<HeldOutPair> pairs{HeldOutPair(X(1), X(2)), HeldOutPair(X(2), X(3))};
  CHECK(verify_exclusion(sets, pairs) == 2);
}

TEST_CASE("spec validation") {
  ObservationSpec spec;
  spec.n_nodes = 3;
  spec.locality_graph = Dag(4);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.locality_graph = Dag(3);
  spec.dropout = 1.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK(parse_observation_mode("wrong_local") == ObservationMode::wrong_local);
  CHECK_THROWS_AS(parse_observation_mode("nearby"), Error);
}
