#pragma once

#include <ostream>
#include <string>

#include "cli/config.hpp"

namespace locality_lab::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kViolation = 3 };

/// Maps a library error to the validation/runtime exit code.
int exit_code_for(const Error& e);

int cmd_gen(const RunConfig& config, std::ostream& log);

struct CorpusArgs {
  std::string net_path;
  std::string pairs_path;          // default: <net>.pairs.json beside the net
  std::string locality_net_path;   // wrong_local only; default: a fresh random DAG
  std::string name;                // default: <net stem>_<mode>
  bool resume = true;
};

int cmd_corpus(const RunConfig& config, const CorpusArgs& args, std::ostream& log);

struct EvalArgs {
  std::string net_path;
  std::string corpus_path;  // required for the empirical backend
  std::string pairs_path;
  std::string condition;    // default: corpus mode, else backend name
  std::string name;         // output subdirectory under eval/
  std::string format = "csv";
  std::size_t net_id = 0;
};

int cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& log);

int cmd_theory(const RunConfig& config, std::ostream& out, std::ostream& log);

struct ServeArgs {
  std::string net_path;
  std::string corpus_path;
  std::string backend = "empirical";
  std::string listen = "127.0.0.1:7777";
  bool stdio = false;
};

int cmd_serve(const RunConfig& config, const ServeArgs& args, std::ostream& log);

}  // namespace locality_lab::cli
