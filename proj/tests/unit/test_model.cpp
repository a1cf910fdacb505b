#include <doctest.h>

#include <cmath>
#include <sstream>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"
#include "locality_lab/model.hpp"
#include "locality_lab/pipeline.hpp"

using namespace locality_lab;

namespace {

VariableId X(std::uint32_t i) { return VariableId{i}; }

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io_error;
}

double sum(const NextVariableDistribution& d) {
  double s = 0;
  for (const auto& [v, p] : d) s += p;
  return s;
}

}  // namespace

TEST_CASE("prompt rendering and state validation") {
  PromptState s{X(2), {{X(1), 0}}};
  CHECK(render_prompt(s, X(2)) == "###\ntarget: X2\nX1=0\nX2=");
  s.context.push_back({X(3), 1});
  CHECK(render_prompt(s, X(4)) == "###\ntarget: X2\nX1=0\nX3=1\nX4=");
  CHECK(code_of([] { validate_state({X(9), {}}, 5); }) == Errc::unknown_variable);
  CHECK(code_of([] { validate_state({X(1), {{X(1), 0}}}, 5); }) == Errc::invalid_argument);
  CHECK(code_of([] { validate_state({X(1), {{X(2), 0}, {X(2), 1}}}, 5); }) == Errc::invalid_argument);
}

TEST_CASE("oracle backend equals exact inference") {
  Rng rng(1);
  const Dag dag = generate_dag(10, 12, rng);
  const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
  const OracleModel model(net);
  for (int t = 0; t < 50; ++t) {
    const VariableId a = X(rng.below(10));
    const VariableId q = X(rng.below(10));
    if (a == q) continue;
    PromptState s{q, {}};
    s.context.push_back({a, Bit(rng.below(2))});
    double exact;
    try {
      exact = conditional(net, q, 1, s.context);
    } catch (const Error&) {
      continue;
    }
    CHECK(std::abs(model.value_p1(s, q) - exact) < 1e-12);
    CHECK(model.value_p1(s, q) == model.value_p1(s, q));
  }
  CHECK(code_of([&] { model.next_variable({X(0), {}}); }) == Errc::unsupported_operation);
}

TEST_CASE("empirical counts on a one-sample corpus") {
  const auto corpus = parse_corpus("###\ntarget: X2\nX1=0\nX2=1\n");
  const auto m = fit_empirical(corpus, 3, 1.0, 50.0);
  CHECK(m.pair_count(X(1), 0, X(2), 1) == 1);
  CHECK(m.pair_count(X(2), 1, X(1), 0) == 1);
  CHECK(m.pair_count(X(1), 1, X(2), 1) == 0);
  CHECK(m.bigram_count(X(1), X(2)) == 1);
  CHECK(m.bigram_count(X(2), X(1)) == 0);
  CHECK(m.unigram_count(X(1)) == 1);
  CHECK(m.samples() == 1);
}

TEST_CASE("empty corpus falls back to one half") {
  const auto m = fit_empirical(std::span<const Sample>{}, 4, 1.0, 50.0);
  CHECK(m.value_p1({X(0), {{X(1), 1}}}, X(0)) == 0.5);
  CHECK(m.value_p1({X(0), {}}, X(0)) == 0.5);
  CHECK(std::abs(sum(m.next_variable({X(0), {}})) - 1.0) < 1e-9);
}

TEST_CASE("counts match a quadratic recount") {
  Rng rng(3);
  const Dag dag = generate_dag(8, 9, rng);
  const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
  const auto spec = make_observation_spec(ObservationMode::local, dag, RadiusKind::geometric, 0.5, 0.2, {});
  const auto corpus = generate_corpus(net, spec, 1000, 4, 1);
  const auto m = fit_empirical(corpus, 8, 1.0, 5.0);
  for (std::uint32_t a = 0; a < 8; ++a) {
    for (std::uint32_t b = 0; b < 8; ++b) {
      if (a == b) continue;
      std::size_t pair[2][2] = {}, bigram = 0;
      for (const Sample& s : corpus) {
        for (std::size_t i = 0; i < s.records.size(); ++i) {
          for (std::size_t j = 0; j < s.records.size(); ++j) {
            if (s.records[i].var == X(a) && s.records[j].var == X(b))
              ++pair[s.records[i].value][s.records[j].value];
          }
          if (i + 1 < s.records.size() && s.records[i].var == X(a) && s.records[i + 1].var == X(b)) ++bigram;
        }
      }
      for (Bit va : {Bit(0), Bit(1)})
        for (Bit vb : {Bit(0), Bit(1)}) CHECK(m.pair_count(X(a), va, X(b), vb) == pair[va][vb]);
      CHECK(m.bigram_count(X(a), X(b)) == bigram);
    }
  }
  std::ostringstream text;
  for (const Sample& s : corpus) text << serialize_sample(s);
  std::istringstream in(text.str());
  CHECK(fit_empirical(in, 8, 1.0, 5.0) == m);
}

TEST_CASE("backoff rule") {
  // X0 and X1 co-occur 60 times, X0 and X2 never.
  std::string text;
  for (int i = 0; i < 60; ++i) text += i % 3 ? "###\ntarget: X1\nX0=1\nX1=1\n" : "###\ntarget: X1\nX0=0\nX1=0\n";
  for (int i = 0; i < 10; ++i) text += "###\ntarget: X2\nX3=0\nX2=1\n";
  const auto corpus = parse_corpus(text);
  const auto m = fit_empirical(corpus, 4, 1.0, 50.0);
  // n(X1=1, X0=1) = 40, n(X0=1) paired = 40.
  CHECK(m.value_p1({X(1), {{X(0), 1}}}, X(1)) == doctest::Approx(41.0 / 42.0));
  CHECK(m.value_p1({X(2), {{X(0), 1}}}, X(2)) == doctest::Approx(m.marginal_p1(X(2))));
  CHECK(m.marginal_p1(X(2)) == doctest::Approx(11.0 / 12.0));
  const auto strict = fit_empirical(corpus, 4, 1.0, 61.0);
  CHECK(strict.value_p1({X(1), {{X(0), 1}}}, X(1)) == doctest::Approx(strict.marginal_p1(X(1))));
}

TEST_CASE("next-variable distribution") {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "###\ntarget: X2\nX1=0\nX2=1\n";
  text += "###\ntarget: X3\nX1=0\nX3=1\n";
  const auto m = fit_empirical(parse_corpus(text), 4, 0.01, 50.0);
  const auto d = m.next_variable({X(3), {{X(1), 0}}});
  CHECK(std::abs(sum(d) - 1.0) < 1e-9);
  double p2 = 0;
  for (const auto& [v, p] : d) {
    CHECK(v != X(1));
    if (v == X(2)) p2 = p;
  }
  CHECK(p2 > 0.9);
  const auto last = m.next_variable({X(3), {{X(0), 0}, {X(1), 0}, {X(2), 1}}});
  REQUIRE(last.size() == 1);
  CHECK(last[0].first == X(3));
  CHECK(last[0].second == 1.0);
}

TEST_CASE("adjacent pairs are learned on a local corpus") {
  Rng rng(12);
  const Dag dag = generate_dag(12, 14, rng);
  const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
  const auto spec = make_observation_spec(ObservationMode::local, dag, RadiusKind::geometric, 0.5, 0.2, {});
  const auto m = fit_empirical(generate_corpus(net, spec, 100000, 3, 1), 12);
  std::size_t checked = 0;
  for (const auto& [p, c] : dag.edges()) {
    for (Bit b : {Bit(0), Bit(1)}) {
      if (m.pair_count(p, b, c, 0) + m.pair_count(p, b, c, 1) < 2000) continue;
      CHECK(std::abs(m.value_p1({c, {{p, b}}}, c) - conditional(net, c, 1, {{p, b}})) < 0.03);
      ++checked;
    }
  }
  CHECK(checked > 5);
}
