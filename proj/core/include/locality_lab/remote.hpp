#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "locality_lab/model.hpp"

namespace locality_lab {

// Newline-delimited JSON, one request and one reply per line:
//   {"op":"value_dist","target":"X4","context":[["X1",0],["X2",1]],"query":"X4"}
//     -> {"p1":0.73}
//   {"op":"next_var","target":"X4","context":[["X1",0]]}
//     -> {"var_probs":{"X5":0.41,"X2":0.33,"X4":0.26}}
//   any failure -> {"error":"<code>","detail":"..."}

std::string value_dist_request(const PromptState& state, VariableId query);
std::string next_var_request(const PromptState& state);

/// Answers one request line with one reply line (no trailing newline).
/// Never throws; malformed input yields an error reply.
std::string handle_request(const SequenceModel& model, std::string_view line);

/// One connection carrying one request at a time.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends `request` plus a newline and returns the reply line without it.
  /// Throws remote_unavailable on connection loss or timeout.
  virtual std::string round_trip(const std::string& request) = 0;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(std::string host, std::uint16_t port,
               std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  std::string round_trip(const std::string& request) override;

 private:
  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

/// Talks to a child process over its stdin/stdout.
class StdioTransport final : public Transport {
 public:
  explicit StdioTransport(std::vector<std::string> argv,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~StdioTransport() override;
  StdioTransport(const StdioTransport&) = delete;
  StdioTransport& operator=(const StdioTransport&) = delete;

  std::string round_trip(const std::string& request) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

/// Appends every request line to a shared NDJSON log before forwarding it.
class RequestLog {
 public:
  void record(const std::string& request);
  std::vector<std::string> lines() const;
  std::string text() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

using TransportFactory = std::function<std::unique_ptr<Transport>()>;

/// "host:port" (or "remote:host:port") -> factory of TCP connections.
TransportFactory tcp_factory(std::string_view address,
                             std::chrono::milliseconds timeout = std::chrono::seconds(30));

/// Model served by another process. Connections are pooled so concurrent
/// callers each get their own.
class RemoteModel final : public SequenceModel {
 public:
  RemoteModel(TransportFactory factory, std::size_t n_nodes,
              std::shared_ptr<RequestLog> log = nullptr);

  std::string_view name() const override { return "remote"; }
  std::size_t n_nodes() const override { return n_; }
  double value_p1(const PromptState& state, VariableId query) const override;
  NextVariableDistribution next_variable(const PromptState& state) const override;

 private:
  std::string call(const std::string& request) const;

  TransportFactory factory_;
  std::size_t n_;
  std::shared_ptr<RequestLog> log_;
  mutable std::mutex pool_mutex_;
  mutable std::vector<std::unique_ptr<Transport>> pool_;
};

/// Serves `model` line by line until `in` ends.
void serve_stream(const SequenceModel& model, std::istream& in, std::ostream& out);

/// Listens on host:port, one thread per connection, until stop becomes true.
/// on_ready receives the bound port (useful with port 0).
void serve_tcp(const SequenceModel& model, const std::string& host, std::uint16_t port,
               const std::atomic<bool>& stop,
               const std::function<void(std::uint16_t)>& on_ready = {});

}  // namespace locality_lab
