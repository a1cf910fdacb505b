#include "locality_lab/remote.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <nlohmann/json.hpp>
#include <thread>

#include "locality_lab/error.hpp"
#include "locality_lab/net_io.hpp"

namespace locality_lab {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json context_json(const Assignment& context) {
  ordered_json arr = ordered_json::array();
  for (const auto& obs : context) arr.push_back(ordered_json::array({format_variable(obs.var), obs.value}));
  return arr;
}

std::string error_reply(std::string_view code, std::string_view detail) {
  return ordered_json{{"error", std::string(code)}, {"detail", std::string(detail)}}.dump();
}

PromptState state_from(const json& doc) {
  PromptState state;
  state.target = parse_variable(doc.at("target").get<std::string>());
  for (const auto& item : doc.at("context")) {
    if (!item.is_array() || item.size() != 2 || !item[1].is_number_integer()) {
      throw Error(Errc::protocol_error, "context entries must be [name, 0|1]");
    }
    const auto value = item[1].get<int>();
    if (value != 0 && value != 1) throw Error(Errc::protocol_error, "context values must be 0 or 1");
    state.context.push_back({parse_variable(item[0].get<std::string>()), static_cast<Bit>(value)});
  }
  return state;
}

[[noreturn]] void unavailable(const std::string& what) {
  throw Error(Errc::remote_unavailable, what + ": " + std::strerror(errno));
}

// Waits until fd is ready for `events`; false on timeout.
bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) unavailable("poll");
  }
}

void write_all(int fd, std::string_view data, std::chrono::milliseconds timeout, bool socket) {
  while (!data.empty()) {
    if (!wait_fd(fd, POLLOUT, timeout)) throw Error(Errc::remote_unavailable, "write timed out");
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                             : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      unavailable("write");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  for (;;) {
    if (auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return line;
    }
    if (!wait_fd(fd, POLLIN, timeout)) throw Error(Errc::remote_unavailable, "reply timed out");
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      unavailable("read");
    }
    if (n == 0) throw Error(Errc::remote_unavailable, "connection closed by peer");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

json parse_reply(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::protocol_error, std::string("unparsable reply: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::protocol_error, "reply is not a JSON object");
  if (doc.contains("error")) {
    const std::string code = doc["error"].is_string() ? doc["error"].get<std::string>() : "";
    const std::string detail =
        doc.contains("detail") && doc["detail"].is_string() ? doc["detail"].get<std::string>() : "";
    throw Error(parse_errc(code).value_or(Errc::protocol_error), "server: " + code + " " + detail);
  }
  return doc;
}

}  // namespace

std::string value_dist_request(const PromptState& state, VariableId query) {
  ordered_json doc;
  doc["op"] = "value_dist";
  doc["target"] = format_variable(state.target);
  doc["context"] = context_json(state.context);
  doc["query"] = format_variable(query);
  return doc.dump();
}

std::string next_var_request(const PromptState& state) {
  ordered_json doc;
  doc["op"] = "next_var";
  doc["target"] = format_variable(state.target);
  doc["context"] = context_json(state.context);
  return doc.dump();
}

std::string handle_request(const SequenceModel& model, std::string_view line) {
  try {
    const json doc = json::parse(line);
    if (!doc.is_object()) return error_reply("protocol_error", "request must be a JSON object");
    const std::string op = doc.at("op").get<std::string>();
    const PromptState state = state_from(doc);
    if (op == "value_dist") {
      const VariableId query = parse_variable(doc.at("query").get<std::string>());
      const double p1 = model.value_p1(state, query);
      return "{\"p1\":" + format_double(p1) + "}";
    }
    if (op == "next_var") {
      std::string out = "{\"var_probs\":{";
      bool first = true;
      for (const auto& [v, p] : model.next_variable(state)) {
        if (!first) out += ",";
        first = false;
        out += "\"" + format_variable(v) + "\":" + format_double(p);
      }
      return out + "}}";
    }
    return error_reply("protocol_error", "unknown op '" + op + "'");
  } catch (const Error& e) {
    // Variables that fail to parse are names the server does not know.
    const Errc code = e.code() == Errc::parse_error ? Errc::unknown_variable : e.code();
    return error_reply(to_string(code), e.what());
  } catch (const json::parse_error& e) {
    return error_reply("parse_error", e.what());
  } catch (const json::exception& e) {
    return error_reply("protocol_error", e.what());
  } catch (const std::exception& e) {
    return error_reply("protocol_error", e.what());
  }
}

TcpTransport::TcpTransport(std::string host, std::uint16_t port, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::remote_unavailable, "resolve " + host + ": " + ::gai_strerror(rc));
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) unavailable("connect " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::string TcpTransport::round_trip(const std::string& request) {
  write_all(fd_, request + "\n", timeout_, true);
  return read_line(fd_, buffer_, timeout_);
}

StdioTransport::StdioTransport(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  if (argv.empty()) throw Error(Errc::invalid_argument, "empty server command");
  // A dead child must surface as an error from write(), not kill us.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) unavailable("pipe");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    unavailable("pipe");
  }
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) unavailable("fork");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

StdioTransport::~StdioTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::string StdioTransport::round_trip(const std::string& request) {
  write_all(to_child_, request + "\n", timeout_, false);
  return read_line(from_child_, buffer_, timeout_);
}

void RequestLog::record(const std::string& request) {
  std::lock_guard lock(mutex_);
  lines_.push_back(request);
}

std::vector<std::string> RequestLog::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

std::string RequestLog::text() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& l : lines_) out += l + "\n";
  return out;
}

TransportFactory tcp_factory(std::string_view address, std::chrono::milliseconds timeout) {
  if (address.starts_with("remote:")) address.remove_prefix(7);
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::invalid_argument, "remote address must be host:port");
  }
  std::string host(address.substr(0, colon));
  const std::string port_text(address.substr(colon + 1));
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "bad port '" + port_text + "'");
  }
  if (port == 0 || port > 65535) throw Error(Errc::invalid_argument, "port out of range");
  return [host, port, timeout] {
    return std::make_unique<TcpTransport>(host, static_cast<std::uint16_t>(port), timeout);
  };
}

RemoteModel::RemoteModel(TransportFactory factory, std::size_t n_nodes, std::shared_ptr<RequestLog> log)
    : factory_(std::move(factory)), n_(n_nodes), log_(std::move(log)) {}

std::string RemoteModel::call(const std::string& request) const {
  if (log_) log_->record(request);
  std::unique_ptr<Transport> conn;
  {
    std::lock_guard lock(pool_mutex_);
    if (!pool_.empty()) {
      conn = std::move(pool_.back());
      pool_.pop_back();
    }
  }
  if (!conn) conn = factory_();
  std::string reply = conn->round_trip(request);  // a failed connection is dropped
  std::lock_guard lock(pool_mutex_);
  pool_.push_back(std::move(conn));
  return reply;
}

double RemoteModel::value_p1(const PromptState& state, VariableId query) const {
  validate_state(state, n_);
  if (query.index >= n_) throw Error(Errc::unknown_variable, format_variable(query));
  const json doc = parse_reply(call(value_dist_request(state, query)));
  if (!doc.contains("p1") || !doc["p1"].is_number()) {
    throw Error(Errc::protocol_error, "reply lacks numeric p1");
  }
  const double p1 = doc["p1"].get<double>();
  if (!(p1 >= 0.0 && p1 <= 1.0)) throw Error(Errc::protocol_error, "p1 outside [0, 1]");
  return p1;
}

NextVariableDistribution RemoteModel::next_variable(const PromptState& state) const {
  validate_state(state, n_);
  const json doc = parse_reply(call(next_var_request(state)));
  if (!doc.contains("var_probs") || !doc["var_probs"].is_object()) {
    throw Error(Errc::protocol_error, "reply lacks var_probs object");
  }
  std::vector<char> in_context(n_, 0);
  for (const auto& obs : state.context) in_context[obs.var.index] = 1;
  NextVariableDistribution dist;
  double total = 0.0;
  for (const auto& [name, value] : doc["var_probs"].items()) {
    const auto var = try_parse_variable(name);
    if (!var || var->index >= n_) throw Error(Errc::protocol_error, "unknown variable '" + name + "' in reply");
    if (in_context[var->index]) throw Error(Errc::protocol_error, name + " is already in the context");
    if (!value.is_number()) throw Error(Errc::protocol_error, "probability for " + name + " is not a number");
    const double p = value.get<double>();
    if (!(p >= 0.0 && std::isfinite(p))) throw Error(Errc::protocol_error, "bad probability for " + name);
    dist.emplace_back(*var, p);
    total += p;
  }
  if (dist.empty() || std::abs(total - 1.0) > 1e-6) {
    throw Error(Errc::protocol_error, "var_probs must sum to 1");
  }
  std::sort(dist.begin(), dist.end());
  for (auto& [v, p] : dist) p /= total;
  return dist;
}

void serve_stream(const SequenceModel& model, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request(model, line) << '\n' << std::flush;
  }
}

void serve_tcp(const SequenceModel& model, const std::string& host, std::uint16_t port,
               const std::atomic<bool>& stop, const std::function<void(std::uint16_t)>& on_ready) {
  const int listener = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listener < 0) unavailable("socket");
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listener);
    throw Error(Errc::invalid_argument, "bind address must be an IPv4 literal");
  }
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
    const int saved = errno;
    ::close(listener);
    errno = saved;
    unavailable("bind " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_ready) on_ready(ntohs(addr.sin_port));

  constexpr std::chrono::milliseconds tick(100);
  std::vector<std::thread> workers;
  while (!stop.load()) {
    if (!wait_fd(listener, POLLIN, tick)) continue;
    const int fd = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    workers.emplace_back([&model, &stop, fd, tick] {
      std::string buffer;
      try {
        while (!stop.load()) {
          if (buffer.find('\n') == std::string::npos && !wait_fd(fd, POLLIN, tick)) continue;
          std::string line = read_line(fd, buffer, std::chrono::seconds(30));
          write_all(fd, handle_request(model, line) + "\n", std::chrono::seconds(30), true);
        }
      } catch (const Error&) {
        // peer closed or stalled; drop the connection
      }
      ::close(fd);
    });
  }
  for (auto& t : workers) t.join();
  ::close(listener);
}

}  // namespace locality_lab
