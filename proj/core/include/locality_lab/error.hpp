#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace locality_lab {

/// Failure categories surfaced by the library. Each maps to a stable
/// snake_case code (see to_string) that also appears in CSV/JSON outputs
/// and in wire-protocol error replies.
enum class Errc {
  invalid_argument,
  infeasible_edge_count,
  generation_stuck,
  cycle_detected,
  zero_probability_evidence,
  too_large,
  non_separable,
  malformed_line,
  target_mismatch,
  parse_error,
  unknown_variable,
  remote_unavailable,
  protocol_error,
  unsupported_operation,
  adjacent_pair,
  insufficient_variables,
  trace_overflow,
  estimation_failed,
  sinkhorn_no_convergence,
  log_of_zero,
  assumption_violated,
  io_error,
};

std::string_view to_string(Errc code) noexcept;
/// Inverse of to_string; nullopt for unrecognized text.
std::optional<Errc> parse_errc(std::string_view text) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace locality_lab
