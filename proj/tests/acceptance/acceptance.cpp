// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance            all criteria
//   acceptance 2 5        only the listed ones

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "locality_lab/error.hpp"
#include "locality_lab/estimators.hpp"
#include "locality_lab/eval.hpp"
#include "locality_lab/hash.hpp"
#include "locality_lab/infer.hpp"
#include "locality_lab/net_io.hpp"
#include "locality_lab/pipeline.hpp"
#include "locality_lab/theory.hpp"
#include "oracles.hpp"

using namespace locality_lab;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

VariableId X(std::uint32_t i) { return VariableId{i}; }

// ---------------------------------------------------------------------------

Outcome inference_equivalence() {
  Rng rng(derive_seed(kSeed, 1));
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int net_no = 0; net_no < 50; ++net_no) {
    const std::size_t n = 4 + rng.below(9);  // 4..12
    const std::size_t max_edges = n * (n - 1) / 2;
    const std::size_t e = std::min(max_edges, n - 1 + rng.below(n + 1));
    const Dag dag = generate_dag(n, e, rng);
    const BayesNet net = assign_cpts(dag, 0.2, 0.2, rng);
    const auto joint = oracle::joint(net);
    for (std::uint32_t t = 0; t < n; ++t) {
      for (std::uint32_t o = 0; o < n; ++o) {
        if (o == t) continue;
        for (Bit b : {Bit(0), Bit(1)}) {
          double ve;
          try {
            ve = conditional(net, X(t), 1, {{X(o), b}});
          } catch (const Error& err) {
            if (err.code() != Errc::zero_probability_evidence) throw;
            ++skipped;
            continue;
          }
          worst = std::max(worst, std::abs(ve - oracle::conditional(joint, X(t), {{X(o), b}})));
          ++checked;
        }
      }
    }
  }
  return {worst <= 1e-10, std::to_string(checked) + " conditionals over 50 nets, max |VE - enum| = " + fmt(worst) +
                              (skipped ? ", " + std::to_string(skipped) + " zero-evidence skipped" : "")};
}

Outcome reasoning_gap() {
  Outcome out;
  std::ostringstream d;
  for (Formulation f : {Formulation::marginal_mixture, Formulation::uniform_mixture}) {
    std::size_t holds = 0, violated = 0, vacuous = 0;
    for (std::size_t c = 0; c < 200; ++c) {
      Rng rng(derive_seed(kSeed + 2, c));
      const GapReport r = gap_check(random_chain(10, 2, rng, true), f);
      holds += r.holds;
      violated += r.violated;
      vacuous += r.vacuous;
    }
    out.pass = out.pass && violated == 0 && holds > 0;
    d << to_string(f) << " " << holds << "/" << holds + violated << " hold (" << vacuous << " vacuous); ";
  }
  out.detail = d.str();
  return out;
}

Outcome closed_form_anchor() {
  double worst_anchor = 0.0, worst_enum = 0.0;
  std::size_t cases = 0;
  Rng rng(derive_seed(kSeed, 3));
  for (int t = 0; t < 100; ++t) {
    const ChainModel chain = random_chain(3, 2 + t % 2, rng, t % 3 == 0);
    const RiskMinimizer q = risk_minimizer(chain, Formulation::marginal_mixture);
    const auto marg = chain_marginal(chain, 2);
    for (std::size_t y0 = 0; y0 < chain.arity; ++y0) {
      const auto cond = chain_conditional(chain, 2, 0, y0);
      const auto e = scaffolded_expectation(q, 2, 0, y0);
      for (std::size_t v = 0; v < chain.arity; ++v)
        worst_anchor = std::max(worst_anchor, std::abs(e[v] - (0.75 * marg[v] + 0.25 * cond[v])));
    }
  }
  for (std::size_t n = 3; n <= 7; ++n) {
    for (std::size_t k = 2; k <= 3; ++k) {
      for (Formulation f : {Formulation::marginal_mixture, Formulation::uniform_mixture}) {
        const ChainModel chain = random_chain(n, k, rng, f == Formulation::uniform_mixture);
        const RiskMinimizer q = risk_minimizer(chain, f);
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t i = j + 2; i < n; ++i)
            for (std::size_t y = 0; y < k; ++y) {
              const auto a = scaffolded_expectation(q, i, j, y);
              const auto b = oracle::enumerate_scaffold(q, i, j, y);
              for (std::size_t v = 0; v < k; ++v) worst_enum = std::max(worst_enum, std::abs(a[v] - b[v]));
              ++cases;
            }
      }
    }
  }
  return {worst_anchor <= 1e-12 && worst_enum <= 1e-12,
          "3/4-1/4 max dev " + fmt(worst_anchor) + " on 100 chains; enumeration max dev " + fmt(worst_enum) + " over " +
              std::to_string(cases) + " (N<=7, K<=3) cases"};
}

Outcome kl_corollary() {
  std::size_t rows = 0, failed = 0;
  double min_margin = 1e300;
  for (std::size_t c = 0; c < 200; ++c) {
    Rng rng(derive_seed(kSeed + 4, c));
    const ChainModel chain = random_chain(10, 2 + c % 2, rng, c % 2 == 0);
    for (const KlRow& row : kl_gap_check(chain)) {
      ++rows;
      failed += !row.holds;
      min_margin = std::min(min_margin, row.kl_marginal - row.kl_minimizer);
    }
  }
  return {failed == 0, std::to_string(rows - failed) + "/" + std::to_string(rows) +
                           " edge-values hold, smallest margin " + fmt(min_margin)};
}

Outcome monte_carlo_consistency() {
  std::size_t within = 0, total = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; total < 200; ++s) {
    Rng g(derive_seed(kSeed + 5, s));
    const Dag dag = generate_dag(20, 20, g);
    const BayesNet net = assign_cpts(dag, 0.2, 0.2, g);
    const OracleModel oracle(net);
    for (int k = 0; k < 20 && total < 200; ++k) {
      const VariableId a = X(g.below(20)), b = X(g.below(20));
      if (a == b || dag.adjacent(a, b)) continue;
      const Query q{a, Bit(g.below(2)), b, 1};
      double exact;
      try {
        exact = conditional(net, b, 1, {{a, q.observed_value}});
      } catch (const Error&) {
        continue;
      }
      Rng mc(derive_seed(kSeed + 55, total));
      const Estimate e = scaffolded(oracle, q, build_scaffold(dag, q), 10000, mc);
      const double err = std::abs(e.value - exact);
      worst = std::max(worst, err);
      within += err <= 0.01;
      ++total;
    }
  }
  const double frac = double(within) / double(total);
  return {frac >= 0.95, std::to_string(within) + "/" + std::to_string(total) + " within 0.01 at M=1e4 (" +
                            fmt(100 * frac) + "%), worst " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Desk-scale end to end, shared by criteria 6 and 7.

struct DeskRun {
  std::map<std::string, std::vector<EstimateRecord>> records;  // by condition
  std::map<std::string, std::size_t> violations;               // held-out co-occurrences
  std::map<std::string, std::size_t> samples;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskRun out;
    const auto sel = select_nets_and_pairs(NetParams{}, SelectionParams{}, kSeed, 0);
    for (std::size_t k = 0; k < sel.selected.size(); ++k) {
      const CandidateNet& cand = sel.selected[k];
      Rng wrong_rng(derive_seed(kSeed, 1000 + k));
      const Dag wrong = generate_dag(cand.net.size(), cand.net.dag().edge_count(), wrong_rng);
      for (ObservationMode mode : {ObservationMode::local, ObservationMode::wrong_local, ObservationMode::fully_observed}) {
        ObservationSpec spec;
        if (mode == ObservationMode::fully_observed) {
          spec.mode = mode;
          spec.n_nodes = cand.net.size();
          spec.held_out = cand.held_out;
        } else {
          spec = make_observation_spec(mode, mode == ObservationMode::local ? cand.net.dag() : wrong,
                                       RadiusKind::geometric, 0.5, 0.2, cand.held_out);
        }
        const auto corpus = generate_corpus(cand.net, spec, 100000, derive_seed(kSeed, 2000 + k), 0);
        const std::string cond(to_string(mode));
        std::vector<std::vector<VariableId>> sets;
        sets.reserve(corpus.size());
        for (const Sample& s : corpus) {
          std::vector<VariableId> vars;
          for (const auto& r : s.records) vars.push_back(r.var);
          sets.push_back(std::move(vars));
        }
        out.violations[cond] += verify_exclusion(sets, cand.held_out);
        out.samples[cond] += corpus.size();

        const auto model = fit_empirical(corpus, cand.net.size());
        EvalOptions opt;
        opt.condition = cond;
        opt.net_id = k;
        opt.seed = derive_seed(kSeed, 3000 + k);
        opt.workers = 0;
        auto res = evaluate(model, cand.net, cand.held_out, opt);
        auto& dst = out.records[cond];
        dst.insert(dst.end(), res.records.begin(), res.records.end());
      }
    }
    return out;
  }();
  return run;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, EstimatorKind k) {
  for (const auto& r : rows)
    if (r.estimator == k) return &r;
  return nullptr;
}

std::string ci(const ConfidenceInterval& c) { return fmt(c.mean) + " [" + fmt(c.lo) + ", " + fmt(c.hi) + "]"; }

Outcome desk_reasoning_gap() {
  const DeskRun& run = desk_run();
  auto summary = [&](const std::string& cond) { return summarize(run.records.at(cond), kSeed); };
  Outcome out;
  std::ostringstream d;

  const auto local = summary("local");
  const auto* dir = find_row(local, EstimatorKind::direct);
  const auto* sca = find_row(local, EstimatorKind::scaffolded);
  const auto* fre = find_row(local, EstimatorKind::free_generation);
  const bool a_scaf = sca->mse_true.hi < dir->mse_true.lo;
  const bool a_free = fre->mse_true.hi < dir->mse_true.lo;
  d << "\n    (a) local: direct " << ci(dir->mse_true) << ", scaffolded " << ci(sca->mse_true) << " "
    << (a_scaf ? "separated" : "OVERLAP") << ", free " << ci(fre->mse_true) << " "
    << (a_free ? "separated" : "OVERLAP") << " (n=" << dir->n << ")"
    << "\n        free traces: mean length " << fmt(fre->mean_trace_length) << ", d-separating "
    << fmt(fre->d_separation_rate) << "; fully_observed free d-separating "
    << fmt(find_row(summary("fully_observed"), EstimatorKind::free_generation)->d_separation_rate);

  const auto full = summary("fully_observed");
  const auto* fdir = find_row(full, EstimatorKind::direct);
  const auto* ffre = find_row(full, EstimatorKind::free_generation);
  const bool b = ffre->mse_true.lo <= fdir->mse_true.hi && fdir->mse_true.lo <= ffre->mse_true.hi;
  d << "\n    (b) fully_observed: direct " << ci(fdir->mse_true) << ", free " << ci(ffre->mse_true) << " "
    << (b ? "overlap" : "SEPARATED");

  const auto wrong = summary("wrong_local");
  const auto* wdir = find_row(wrong, EstimatorKind::direct);
  const bool c = wdir->mse_marginal.mean < wdir->mse_true.mean;
  d << "\n    (c) wrong_local direct: vs marginal " << fmt(wdir->mse_marginal.mean) << ", vs true "
    << fmt(wdir->mse_true.mean);

  out.pass = a_scaf && a_free && b && c;
  out.detail = std::string("(a) ") + (a_scaf && a_free ? "pass" : "FAIL") + " (b) " + (b ? "pass" : "FAIL") + " (c) " +
               (c ? "pass" : "FAIL") + d.str();
  return out;
}

Outcome corpus_integrity() {
  const DeskRun& run = desk_run();
  Outcome out;
  std::ostringstream d;
  for (const auto& [cond, v] : run.violations) {
    out.pass = out.pass && v == 0;
    d << cond << " " << v << "/" << run.samples.at(cond) << " violating; ";
  }

  const std::uint32_t ids[] = {17, 92, 13, 52, 24, 26, 91, 36, 34, 12, 20, 5};
  const Bit bits[] = {0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1};
  Sample s;
  for (int k = 0; k < 12; ++k) s.records.push_back({X(ids[k]), bits[k]});
  s.target = X(5);
  const bool exact = serialize_sample(s) ==
                     "###\ntarget: X5\nX17=0\nX92=0\nX13=0\nX52=1\nX24=1\nX26=1\nX91=0\nX36=0\nX34=0\nX12=1\nX20=0\nX5=1\n";
  out.pass = out.pass && exact;
  d << "reference sample " << (exact ? "byte-exact" : "MISMATCH") << "; ";

  Rng rng(derive_seed(kSeed, 7));
  std::size_t ok = 0;
  for (int i = 0; i < 10000; ++i) {
    Sample r;
    std::vector<std::uint32_t> pool(100);
    for (std::uint32_t v = 0; v < 100; ++v) pool[v] = v;
    rng.shuffle(std::span<std::uint32_t>(pool));
    const std::size_t len = 1 + rng.below(25);
    for (std::size_t k = 0; k < len; ++k) r.records.push_back({X(pool[k]), Bit(rng.below(2))});
    r.target = r.records.back().var;
    ok += parse_sample(serialize_sample(r)) == r;
  }
  out.pass = out.pass && ok == 10000;
  d << ok << "/10000 round trips";
  out.detail = d.str();
  return out;
}

Outcome scaffold_validity() {
  // Bayes-ball against path enumeration first.
  std::size_t agree = 0, compared = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(derive_seed(kSeed + 8, s));
    const Dag dag = generate_dag(10, 10 + rng.below(8), rng);
    for (int t = 0; t < 40; ++t) {
      const VariableId a = X(rng.below(10)), b = X(rng.below(10));
      if (a == b) continue;
      std::vector<VariableId> given;
      for (std::uint32_t v = 0; v < 10; ++v)
        if (X(v) != a && X(v) != b && rng.bernoulli(0.3)) given.push_back(X(v));
      agree += d_separated(dag, a, b, given) == oracle::d_separated_by_paths(dag, a, b, given);
      ++compared;
    }
  }
  std::size_t plans = 0, separating = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    Rng rng(derive_seed(kSeed + 88, s));
    const Dag dag = generate_dag(20, 20 + rng.below(10), rng);
    for (std::uint32_t a = 0; a < 20; ++a)
      for (std::uint32_t b = 0; b < 20; ++b) {
        if (a == b || dag.adjacent(X(a), X(b))) continue;
        const auto plan = build_scaffold(dag, Query{X(a), 0, X(b), 1});
        separating += d_separated(dag, X(a), X(b), plan);
        ++plans;
      }
  }
  return {agree == compared && separating == plans,
          "Bayes-ball vs path enumeration " + std::to_string(agree) + "/" + std::to_string(compared) + "; plans " +
              std::to_string(separating) + "/" + std::to_string(plans) + " d-separate"};
}

Outcome determinism() {
  auto fingerprint = [](std::size_t workers) {
    const auto sel = select_nets_and_pairs(NetParams{}, SelectionParams{}, kSeed + 9, workers);
    std::string nets, corpus, csv;
    for (const auto& c : sel.selected) nets += net_to_json(c.net) + held_out_to_json(c.held_out);
    const CandidateNet& cand = sel.selected[0];
    const auto spec = make_observation_spec(ObservationMode::local, cand.net.dag(), RadiusKind::geometric, 0.5, 0.2,
                                            cand.held_out);
    const auto samples = generate_corpus(cand.net, spec, 20000, kSeed + 9, workers);
    for (const Sample& s : samples) append_serialized(corpus, s);
    EvalOptions opt;
    opt.seed = kSeed + 9;
    opt.workers = workers;
    csv = records_csv(evaluate(fit_empirical(samples, cand.net.size()), cand.net, cand.held_out, opt).records);
    return std::vector<std::string>{sha256_hex(nets), sha256_hex(corpus), sha256_hex(csv)};
  };
  const auto a = fingerprint(1), b = fingerprint(1), c = fingerprint(4);
  const bool same = a == b && a == c;
  return {same, std::string("nets ") + (a[0] == b[0] && a[0] == c[0] ? "identical" : "DIFFER") + ", corpus " +
                    (a[1] == b[1] && a[1] == c[1] ? "identical" : "DIFFER") + ", eval csv " +
                    (a[2] == b[2] && a[2] == c[2] ? "identical" : "DIFFER") + " (two runs, 1 and 4 workers)"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "inference oracle equivalence", 10, inference_equivalence},
      {2, "reasoning-gap inequality", 30, reasoning_gap},
      {3, "closed-form anchor", 0, closed_form_anchor},
      {4, "KL corollary", 0, kl_corollary},
      {5, "Monte-Carlo consistency", 0, monte_carlo_consistency},
      {6, "desk-scale reasoning gap", 600, desk_reasoning_gap},
      {7, "corpus integrity", 0, corpus_integrity},
      {8, "scaffold validity", 0, scaffold_validity},
      {9, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += " (over the " + fmt(c.budget_seconds) + " s budget)";
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
