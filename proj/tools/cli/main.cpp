#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "cli/commands.hpp"
#include "locality_lab/error.hpp"
#include "locality_lab/net_io.hpp"

namespace ll = locality_lab;
namespace cli = locality_lab::cli;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::string> mode;
  std::optional<std::size_t> n_samples;
  std::optional<std::string> backend;
  std::vector<std::size_t> budget_tokens;
  std::optional<std::size_t> m_samples;
  std::vector<std::string> estimators;
  std::optional<std::size_t> n_chains;
  std::optional<double> uniform_weight;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config overlaid on the preset");
  cmd->add_option("--preset", f.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory (env LOCALITY_LAB_OUT)");
  cmd->add_option("--workers", f.workers, "worker threads, 0 = all cores");
}

cli::RunConfig resolve(const CommonFlags& f) {
  cli::RunConfig config = cli::preset_config(f.preset);
  if (!f.config_path.empty()) config = cli::merge_config(config, ll::read_file(f.config_path));
  if (const char* env = std::getenv("LOCALITY_LAB_OUT"); env && *env) config.out = env;
  if (f.out) config.out = *f.out;
  if (f.seed) config.seed = *f.seed;
  if (f.workers) config.workers = *f.workers;
  if (f.mode) config.observation.mode = ll::parse_observation_mode(*f.mode);
  if (f.n_samples) config.corpus.n_samples = *f.n_samples;
  if (f.backend) config.eval.backend = *f.backend;
  if (!f.budget_tokens.empty()) config.eval.budget_tokens = f.budget_tokens;
  if (f.m_samples) config.eval.m_samples = *f.m_samples;
  if (!f.estimators.empty()) {
    config.eval.estimators.clear();
    for (const auto& e : f.estimators) config.eval.estimators.push_back(ll::parse_estimator(e));
  }
  if (f.n_chains) config.theory.n_chains = *f.n_chains;
  if (f.uniform_weight) config.theory.uniform_weight = *f.uniform_weight;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locality_lab: local-observation experiments on synthetic Bayes nets"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* gen = app.add_subcommand("gen", "sample candidate nets and choose held-out pairs");
  add_common(gen, flags);

  cli::CorpusArgs corpus_args;
  auto* corpus = app.add_subcommand("corpus", "generate a training corpus from a net");
  add_common(corpus, flags);
  corpus->add_option("--net", corpus_args.net_path, "net JSON")->required();
  corpus->add_option("--pairs", corpus_args.pairs_path, "held-out pairs JSON");
  corpus->add_option("--mode", flags.mode, "local, wrong_local or fully_observed");
  corpus->add_option("--locality-net", corpus_args.locality_net_path, "locality graph for wrong_local");
  corpus->add_option("--samples", flags.n_samples, "number of samples");
  corpus->add_option("--name", corpus_args.name, "corpus file stem");
  bool no_resume = false;
  corpus->add_flag("--no-resume", no_resume, "start over even if a checkpoint exists");

  cli::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "run the estimators against exact conditionals");
  add_common(eval, flags);
  eval->add_option("--net", eval_args.net_path, "net JSON")->required();
  eval->add_option("--corpus", eval_args.corpus_path, "corpus text (empirical backend)");
  eval->add_option("--pairs", eval_args.pairs_path, "held-out pairs JSON");
  eval->add_option("--backend", flags.backend, "oracle, empirical or remote:host:port");
  eval->add_option("--budget-tokens", flags.budget_tokens, "learning-curve budgets in characters");
  eval->add_option("--m-samples", flags.m_samples, "samples per stochastic estimate");
  eval->add_option("--estimators", flags.estimators, "subset of direct, scaffolded, negative_scaffolded, free");
  eval->add_option("--condition", eval_args.condition, "label for the records");
  eval->add_option("--name", eval_args.name, "output subdirectory");
  eval->add_option("--net-id", eval_args.net_id, "net index for the records");
  eval->add_option("--format", eval_args.format, "records format")->check(CLI::IsMember({"csv", "json"}));

  auto* theory = app.add_subcommand("theory", "check the Markov-chain bias results");
  add_common(theory, flags);
  theory->add_option("--chains", flags.n_chains, "number of random chains");
  theory->add_option("--uniform-weight", flags.uniform_weight, "weight of the uniform pair component");

  cli::ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "answer model queries over NDJSON");
  add_common(serve, flags);
  serve->add_option("--net", serve_args.net_path, "net JSON")->required();
  serve->add_option("--corpus", serve_args.corpus_path, "corpus text (empirical backend)");
  serve->add_option("--backend", serve_args.backend, "oracle or empirical");
  serve->add_option("--listen", serve_args.listen, "host:port, port 0 picks a free port");
  serve->add_flag("--stdio", serve_args.stdio, "serve stdin/stdout instead of TCP");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kValidation;
  }

  try {
    const cli::RunConfig config = resolve(flags);
    if (gen->parsed()) return cli::cmd_gen(config, std::cerr);
    if (corpus->parsed()) {
      corpus_args.resume = !no_resume;
      return cli::cmd_corpus(config, corpus_args, std::cerr);
    }
    if (eval->parsed()) return cli::cmd_eval(config, eval_args, std::cerr);
    if (theory->parsed()) return cli::cmd_theory(config, std::cout, std::cerr);
    if (serve->parsed()) return cli::cmd_serve(config, serve_args, std::cerr);
  } catch (const ll::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kRuntime;
  }
  return cli::kValidation;
}
