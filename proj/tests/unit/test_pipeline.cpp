#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "locality_lab/error.hpp"
#include "locality_lab/infer.hpp"
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

Sample random_sample(Rng& rng) {
  std::vector<std::uint32_t> ids(60);
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i * 7 + 3;
  rng.shuffle(std::span<std::uint32_t>(ids));
  Sample s;
  const std::size_t len = 1 + rng.below(20);
  for (std::size_t k = 0; k < len; ++k) s.records.push_back({X(ids[k]), Bit(rng.below(2))});
  s.target = s.records.back().var;
  return s;
}

}  // namespace

TEST_CASE("serialization layout") {
  Sample one{{{X(1), 0}}, X(1)};
  CHECK(serialize_sample(one) == "###\ntarget: X1\nX1=0\n");

  const std::uint32_t ids[] = {17, 92, 13, 52, 24, 26, 91, 36, 34, 12, 20, 5};
  const Bit bits[] = {0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1};
  Sample full;
  for (int k = 0; k < 12; ++k) full.records.push_back({X(ids[k]), bits[k]});
  full.target = X(5);
  const std::string expected =
      "###\ntarget: X5\nX17=0\nX92=0\nX13=0\nX52=1\nX24=1\nX26=1\nX91=0\nX36=0\nX34=0\nX12=1\nX20=0\nX5=1\n";
  CHECK(serialize_sample(full) == expected);
  CHECK(parse_sample(expected) == full);
}

TEST_CASE("round trip on random samples") {
  Rng rng(8);
  std::string corpus;
  std::vector<Sample> samples;
  for (int i = 0; i < 10000; ++i) {
    samples.push_back(random_sample(rng));
    const std::string text = serialize_sample(samples.back());
    REQUIRE(parse_sample(text) == samples.back());
    corpus += text;
  }
  CHECK(parse_corpus(corpus) == samples);

  std::istringstream in(corpus);
  CorpusReader reader(in);
  std::size_t n = 0;
  while (auto s = reader.next()) REQUIRE(*s == samples[n++]);
  CHECK(n == samples.size());
  CHECK(reader.characters() == corpus.size());
}

TEST_CASE("parse errors") {
  CHECK(code_of([] { parse_sample("###\ntarget: X5\nX4=1\n"); }) == Errc::target_mismatch);
  CHECK(code_of([] { parse_sample("###\ntarget: X5\nhello\nX5=1\n"); }) == Errc::malformed_line);
  CHECK(code_of([] { parse_sample("###\ntarget: X5\nX5=2\n"); }) == Errc::malformed_line);
  CHECK(code_of([] { parse_sample("target: X5\nX5=1\n"); }) == Errc::malformed_line);
  CHECK(code_of([] { parse_sample("###\ntarget: X5\nX5=1\nX5=1\n"); }) != Errc::io_error);
  try {
    parse_sample("###\ntarget: X5\nX4=1\nbad\nX5=1\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK(parse_corpus("").empty());
}

TEST_CASE("samples follow the observation spec") {
  Rng rng(1);
  const Dag dag = generate_dag(12, 14, rng);
  const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
  const auto pairs = rank_non_adjacent_pairs(net);
  std::vector<HeldOutPair> held(pairs.begin(), pairs.begin() + 3);
  const auto spec = make_observation_spec(ObservationMode::local, dag, RadiusKind::geometric, 0.5, 0.2, held);
  const auto corpus = generate_corpus(net, spec, 100000, 77, 1);

  std::vector<std::vector<VariableId>> sets;
  for (const Sample& s : corpus) {
    REQUIRE(s.records.size() >= 2);
    REQUIRE(s.target == s.records.back().var);
    std::vector<VariableId> vars;
    for (const auto& r : s.records) vars.push_back(r.var);
    std::sort(vars.begin(), vars.end());
    sets.push_back(vars);
  }
  CHECK(verify_exclusion(sets, held) == 0);
  const CorpusStats stats = corpus_stats(corpus, 12);
  for (const auto& p : held) CHECK(stats.cooccur(p.a, p.b) == 0);

  // Adjacent pairs: empirical conditionals against exact inference.
  std::size_t checked = 0;
  for (const auto& [p, c] : dag.edges()) {
    double n[2] = {0, 0}, n1[2] = {0, 0};
    for (const Sample& s : corpus) {
      int vp = -1, vc = -1;
      for (const auto& r : s.records) {
        if (r.var == p) vp = r.value;
        if (r.var == c) vc = r.value;
      }
      if (vp < 0 || vc < 0) continue;
      n[vp] += 1;
      n1[vp] += vc;
    }
    for (Bit b : {Bit(0), Bit(1)}) {
      if (n[b] < 2000) continue;
      CHECK(std::abs(n1[b] / n[b] - conditional(net, c, 1, {{p, b}})) < 0.02);
      ++checked;
    }
  }
  CHECK(checked > 5);
}

TEST_CASE("corpus generation is deterministic across workers and resumable") {
  Rng rng(2);
  const Dag dag = generate_dag(20, 20, rng);
  const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
  const auto spec = make_observation_spec(ObservationMode::local, dag, RadiusKind::geometric, 0.5, 0.2, {});
  const auto a = generate_corpus(net, spec, 3000, 5, 1);
  const auto b = generate_corpus(net, spec, 3000, 5, 4);
  CHECK(a == b);
  std::vector<Sample> tail;
  CorpusOptions opt;
  opt.n_samples = 3000;
  opt.seed = 5;
  opt.start_index = 1234;
  opt.workers = 3;
  generate_corpus(net, spec, opt, [&](std::size_t i, const Sample& s) {
    REQUIRE(i == 1234 + tail.size());
    tail.push_back(s);
  });
  CHECK(std::equal(tail.begin(), tail.end(), a.begin() + 1234));
}

TEST_CASE("single-variable subsets make a one-record sample") {
  World w{1, 0, 1};
  Rng rng(1);
  const VariableId v[] = {X(2)};
  const Sample s = make_sample(w, v, rng);
  CHECK(s.records == std::vector<Observation>{{X(2), 1}});
  CHECK(s.target == X(2));
}

TEST_CASE("net and pair selection") {
  const auto result = select_nets_and_pairs(NetParams{}, SelectionParams{}, 3, 2);
  CHECK(result.candidates.size() == 10);
  CHECK(result.selected.size() == 2);
  for (const auto& c : result.candidates) {
    CHECK(c.top_pairs.size() == 10);
    CHECK(c.held_out.size() == 5);
    for (const auto& h : c.held_out) {
      CHECK(std::find(c.top_pairs.begin(), c.top_pairs.end(), h) != c.top_pairs.end());
      CHECK_FALSE(c.net.dag().adjacent(h.a, h.b));
    }
    for (std::size_t k = 1; k < c.top_pairs.size(); ++k) CHECK(c.top_pairs[k - 1].mi >= c.top_pairs[k].mi);
  }
  double best_unchosen = 0;
  for (const auto& c : result.candidates) {
    if (std::find(result.report.chosen.begin(), result.report.chosen.end(), c.id) == result.report.chosen.end())
      best_unchosen = std::max(best_unchosen, c.mean_held_out_mi);
  }
  CHECK(result.selected[0].mean_held_out_mi >= result.selected[1].mean_held_out_mi);
  CHECK(result.selected[1].mean_held_out_mi >= best_unchosen);
  CHECK(select_nets_and_pairs(NetParams{}, SelectionParams{}, 3, 1).report.chosen == result.report.chosen);

  SelectionParams single{1, 10, 5, 1};
  CHECK(select_nets_and_pairs(NetParams{}, single, 9).report.chosen == std::vector<std::size_t>{0});
  CHECK(selection_pairs_csv(result).rfind("candidate,rank,a,b,mi,held_out\n", 0) == 0);
}

TEST_CASE("corpus stats by hand") {
  const CorpusStats empty = corpus_stats({}, 3);
  CHECK(empty.samples == 0);
  CHECK(empty.characters == 0);
  const std::vector<Sample> one{Sample{{{X(0), 1}, {X(2), 0}}, X(2)}};
  const CorpusStats s = corpus_stats(one, 3);
  CHECK(s.samples == 1);
  CHECK(s.records == 2);
  CHECK(s.characters == serialize_sample(one[0]).size());
  CHECK(s.frequency == std::vector<std::size_t>{1, 0, 1});
  CHECK(s.cooccur(X(0), X(2)) == 1);
  CHECK(s.cooccur(X(2), X(0)) == 1);
  CHECK(s.cooccur(X(0), X(1)) == 0);
}

TEST_CASE("sidecar documents round trip") {
  const std::vector<HeldOutPair> pairs{HeldOutPair(X(3), X(1), 0.25), HeldOutPair(X(4), X(9), 1.0 / 3.0)};
  const auto back = held_out_from_json(held_out_to_json(pairs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].a == X(1));
  CHECK(back[1].mi == pairs[1].mi);

  Rng rng(1);
  CorpusManifest m;
  m.net_ref = "abc";
  m.spec = make_observation_spec(ObservationMode::wrong_local, generate_dag(10, 9, rng), RadiusKind::zipf, 2.0,
                                 0.1, pairs);
  m.n_samples = 77;
  m.seed = 9;
  const std::string text = manifest_to_json(m);
  CHECK(manifest_to_json(manifest_from_json(text)) == text);
  CHECK(manifest_from_json(text).spec.locality_graph == m.spec.locality_graph);
  CHECK(manifest_from_json(text).spec.radius.k_max == m.spec.radius.k_max);
}
