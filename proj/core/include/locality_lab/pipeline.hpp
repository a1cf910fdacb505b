#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/graph.hpp"
#include "locality_lab/obsdist.hpp"

namespace locality_lab {

/// One training sample: records in presentation order; target is the
/// variable of the last record.
struct Sample {
  std::vector<Observation> records;
  VariableId target;

  /// Throws target_mismatch / invalid_argument when the invariants fail.
  void validate() const;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// "###\ntarget: X<t>\n" followed by "X<i>=<b>\n" per record.
std::string serialize_sample(const Sample& sample);
void append_serialized(std::string& out, const Sample& sample);

/// Inverse of serialize_sample for exactly one block (trailing newline
/// optional). Throws malformed_line or target_mismatch.
Sample parse_sample(std::string_view block);
std::vector<Sample> parse_corpus(std::string_view text);

/// Streaming reader over concatenated serialized samples.
class CorpusReader {
 public:
  explicit CorpusReader(std::istream& in) : in_(in) {}

  /// Next sample, or nullopt at end of input.
  std::optional<Sample> next();
  /// Characters consumed by the samples returned so far.
  std::size_t characters() const noexcept { return characters_; }

 private:
  std::istream& in_;
  std::string pending_;
  bool have_pending_ = false;
  std::size_t line_no_ = 0;
  std::size_t characters_ = 0;
};

/// Values of `vars` taken from `world`, in uniformly random order.
Sample make_sample(const World& world, std::span<const VariableId> vars, Rng& rng);

inline constexpr std::size_t kMaxSelectionAttempts = 10'000;

struct CorpusOptions {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::size_t start_index = 0;  // resume point; sample i always uses stream i
  std::size_t workers = 1;
  std::size_t min_sample_size = 2;  // smaller selections are redrawn
};

/// Sample i from stream derive_seed(seed, i): variable subset from the
/// observation spec (redrawn while smaller than min_sample_size), one full
/// ancestral world, projected and shuffled.
Sample generate_sample(const BayesNet& net, const ObservationSpec& spec, Rng& rng,
                       std::size_t min_sample_size = 2);

/// Emits samples start_index .. n_samples-1 to `sink` in index order,
/// independent of the worker count.
void generate_corpus(const BayesNet& net, const ObservationSpec& spec, const CorpusOptions& options,
                     const std::function<void(std::size_t, const Sample&)>& sink);
std::vector<Sample> generate_corpus(const BayesNet& net, const ObservationSpec& spec,
                                    std::size_t n_samples, std::uint64_t seed,
                                    std::size_t workers = 1);

// --- Net and pair selection --------------------------------------------------

struct NetParams {
  std::size_t n_nodes = 20;
  std::size_t n_edges = 20;
  double beta_alpha = 0.2;
  double beta_beta = 0.2;
};

struct SelectionParams {
  std::size_t n_candidates = 10;
  std::size_t n_top_pairs = 10;
  std::size_t n_holdout = 5;
  std::size_t n_selected = 2;
};

/// Non-adjacent pairs (no edge either way) ranked by mutual information,
/// descending; ties by (a, b).
std::vector<HeldOutPair> rank_non_adjacent_pairs(const BayesNet& net);

struct CandidateNet {
  std::size_t id = 0;
  BayesNet net;
  std::vector<HeldOutPair> top_pairs;
  std::vector<HeldOutPair> held_out;
  double mean_held_out_mi = 0.0;
};

struct SelectionReport {
  SelectionParams params;
  NetParams net_params;
  std::uint64_t seed = 0;
  std::vector<double> mean_held_out_mi;  // per candidate
  std::vector<std::size_t> chosen;       // candidate ids, best first
};

struct SelectionResult {
  SelectionReport report;
  std::vector<CandidateNet> candidates;  // all candidates, by id
  std::vector<CandidateNet> selected;    // in report.chosen order
};

/// Candidate c is built from stream derive_seed(seed, c): DAG, CPTs, then a
/// uniform draw of n_holdout of its top n_top_pairs pairs. The n_selected
/// candidates with the largest mean held-out MI are chosen.
SelectionResult select_nets_and_pairs(const NetParams& net_params, const SelectionParams& params,
                                      std::uint64_t seed, std::size_t workers = 1);

std::string selection_report_json(const SelectionResult& result);
/// candidate,rank,a,b,mi,held_out
std::string selection_pairs_csv(const SelectionResult& result);

// --- Corpus statistics -------------------------------------------------------

struct CorpusStats {
  std::size_t n_nodes = 0;
  std::size_t samples = 0;
  std::size_t records = 0;
  std::size_t characters = 0;
  std::vector<std::size_t> frequency;    // per variable
  std::vector<std::size_t> cooccurrence; // n_nodes x n_nodes, symmetric

  explicit CorpusStats(std::size_t nodes = 0);
  void add(const Sample& sample);
  std::size_t cooccur(VariableId a, VariableId b) const {
    return cooccurrence[a.index * n_nodes + b.index];
  }
};

CorpusStats corpus_stats(std::span<const Sample> corpus, std::size_t n_nodes);

// --- Sidecar documents -------------------------------------------------------

inline constexpr std::string_view kCorpusFormatVersion = "locality-corpus/1";

struct CorpusManifest {
  std::string net_ref;  // sha256 of the net file bytes
  ObservationSpec spec;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::size_t min_sample_size = 2;
  std::string format_version{kCorpusFormatVersion};
};

std::string held_out_to_json(std::span<const HeldOutPair> pairs);
std::vector<HeldOutPair> held_out_from_json(std::string_view text);

std::string observation_spec_to_json(const ObservationSpec& spec);
ObservationSpec observation_spec_from_json(std::string_view text);

std::string manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(std::string_view text);

}  // namespace locality_lab
