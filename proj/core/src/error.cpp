#include "locality_lab/error.hpp"

namespace locality_lab {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::infeasible_edge_count: return "infeasible_edge_count";
    case Errc::generation_stuck: return "generation_stuck";
    case Errc::cycle_detected: return "cycle_detected";
    case Errc::zero_probability_evidence: return "zero_probability_evidence";
    case Errc::too_large: return "too_large";
    case Errc::non_separable: return "non_separable";
    case Errc::malformed_line: return "malformed_line";
    case Errc::target_mismatch: return "target_mismatch";
    case Errc::parse_error: return "parse_error";
    case Errc::unknown_variable: return "unknown_variable";
    case Errc::remote_unavailable: return "remote_unavailable";
    case Errc::protocol_error: return "protocol_error";
    case Errc::unsupported_operation: return "unsupported_operation";
    case Errc::adjacent_pair: return "adjacent_pair";
    case Errc::insufficient_variables: return "insufficient_variables";
    case Errc::trace_overflow: return "trace_overflow";
    case Errc::estimation_failed: return "estimation_failed";
    case Errc::sinkhorn_no_convergence: return "sinkhorn_no_convergence";
    case Errc::log_of_zero: return "log_of_zero";
    case Errc::assumption_violated: return "assumption_violated";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

std::optional<Errc> parse_errc(std::string_view text) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::io_error); ++i) {
    if (to_string(static_cast<Errc>(i)) == text) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace locality_lab
