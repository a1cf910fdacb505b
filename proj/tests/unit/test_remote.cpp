#include <doctest.h>

#include <atomic>
#include <cmath>
#include <future>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "locality_lab/error.hpp"
#include "locality_lab/pipeline.hpp"
#include "locality_lab/remote.hpp"

using namespace locality_lab;
using nlohmann::json;

namespace {

VariableId X(std::uint32_t i) { return VariableId{i}; }

EmpiricalBackoffModel small_model() {
  std::string text;
  for (int i = 0; i < 80; ++i) {
    text += "###\ntarget: X2\nX0=" + std::to_string(i % 2) + "\nX1=" + std::to_string(i % 3 == 0) + "\nX2=" +
            std::to_string(i % 2) + "\n";
  }
  return fit_empirical(parse_corpus(text), 4, 1.0, 10.0);
}

// Scripted peer: replies with canned lines in order.
class ScriptTransport : public Transport {
 public:
  explicit ScriptTransport(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string round_trip(const std::string&) override {
    if (next_ >= replies_.size()) throw Error(Errc::remote_unavailable, "script exhausted");
    return replies_[next_++];
  }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

Errc remote_error(const std::string& reply, bool next_var) {
  RemoteModel m([reply] { return std::make_unique<ScriptTransport>(std::vector<std::string>{reply}); }, 5);
  try {
    if (next_var) {
      m.next_variable({X(4), {{X(1), 0}}});
    } else {
      m.value_p1({X(4), {{X(1), 0}}}, X(4));
    }
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error for " << reply);
  return Errc::io_error;
}

}  // namespace

TEST_CASE("request lines match the wire format") {
  const PromptState s{X(4), {{X(1), 0}, {X(2), 1}}};
  CHECK(value_dist_request(s, X(4)) ==
        R"({"op":"value_dist","target":"X4","context":[["X1",0],["X2",1]],"query":"X4"})");
  CHECK(next_var_request({X(4), {{X(1), 0}}}) == R"({"op":"next_var","target":"X4","context":[["X1",0]]})");
  CHECK(next_var_request({X(4), {}}) == R"({"op":"next_var","target":"X4","context":[]})");
}

TEST_CASE("server replies") {
  const auto model = small_model();
  const PromptState s{X(2), {{X(0), 1}}};
  const json v = json::parse(handle_request(model, value_dist_request(s, X(2))));
  CHECK(v.at("p1").get<double>() == model.value_p1(s, X(2)));
  const json n = json::parse(handle_request(model, next_var_request(s)));
  double total = 0;
  for (const auto& [k, p] : n.at("var_probs").items()) total += p.get<double>();
  CHECK(std::abs(total - 1.0) < 1e-9);

  auto err = [&](const std::string& line) { return json::parse(handle_request(model, line)).at("error").get<std::string>(); };
  CHECK(err("not json") == "parse_error");
  CHECK(err(R"({"op":"dance"})") == "protocol_error");
  CHECK(err(R"({"op":"value_dist","target":"X9","context":[],"query":"X9"})") == "unknown_variable");
  CHECK(err(R"({"op":"value_dist","target":"Y1","context":[],"query":"X1"})") == "unknown_variable");
  CHECK(err(R"({"op":"value_dist","target":"X2","context":[["X2",0]],"query":"X2"})") == "invalid_argument");
  CHECK(err(R"({"op":"value_dist","target":"X2","context":[["X0",3]],"query":"X2"})") == "protocol_error");

  OracleModel oracle(BayesNet(Dag(3), {Cpt{X(0), {}, {0.5}}, Cpt{X(1), {}, {0.5}}, Cpt{X(2), {}, {0.5}}}));
  CHECK(json::parse(handle_request(oracle, next_var_request({X(2), {}}))).at("error") == "unsupported_operation");
}

TEST_CASE("server survives fuzzed lines") {
  const auto model = small_model();
  Rng rng(5);
  const std::string alphabet = "{}[]\":,Xop01valuedist_nextvarcontextquerytarget \\";
  const std::string seed_line = value_dist_request({X(2), {{X(0), 1}}}, X(2));
  for (int i = 0; i < 3000; ++i) {
    std::string line = seed_line;
    const std::size_t edits = 1 + rng.below(4);
    for (std::size_t e = 0; e < edits; ++e) {
      const std::size_t pos = rng.below(line.size());
      switch (rng.below(3)) {
        case 0: line[pos] = alphabet[rng.below(alphabet.size())]; break;
        case 1: line.erase(pos, 1); break;
        default: line.insert(pos, 1, alphabet[rng.below(alphabet.size())]);
      }
    }
    const std::string reply = handle_request(model, line);
    const json r = json::parse(reply);
    CHECK((r.contains("p1") || r.contains("var_probs") || r.contains("error")));
    if (r.contains("p1")) CHECK((r["p1"].get<double>() >= 0.0 && r["p1"].get<double>() <= 1.0));
  }
}

TEST_CASE("client validates replies") {
  CHECK(remote_error(R"({"p1":1.5})", false) == Errc::protocol_error);
  CHECK(remote_error(R"({"p1":"high"})", false) == Errc::protocol_error);
  CHECK(remote_error("garbage", false) == Errc::protocol_error);
  CHECK(remote_error(R"({"error":"unknown_variable","detail":"X7"})", false) == Errc::unknown_variable);
  CHECK(remote_error(R"({"error":"mystery"})", false) == Errc::protocol_error);
  CHECK(remote_error(R"({"var_probs":{"X2":0.5,"X4":0.4}})", true) == Errc::protocol_error);
  CHECK(remote_error(R"({"var_probs":{"X1":0.5,"X4":0.5}})", true) == Errc::protocol_error);
  CHECK(remote_error(R"({"var_probs":{"X9":0.5,"X4":0.5}})", true) == Errc::protocol_error);
  CHECK(remote_error(R"({"var_probs":{"Z":0.5,"X4":0.5}})", true) == Errc::protocol_error);

  RemoteModel ok([] { return std::make_unique<ScriptTransport>(std::vector<std::string>{R"({"var_probs":{"X4":0.25,"X0":0.75}})"}); }, 5);
  const auto d = ok.next_variable({X(4), {{X(1), 0}}});
  REQUIRE(d.size() == 2);
  CHECK(d[0] == std::pair<VariableId, double>{X(0), 0.75});
}

TEST_CASE("tcp round trip agrees with the local model") {
  const auto model = small_model();
  std::atomic<bool> stop{false};
  std::promise<std::uint16_t> ready;
  std::thread server([&] {
    serve_tcp(model, "127.0.0.1", 0, stop, [&](std::uint16_t port) { ready.set_value(port); });
  });
  const std::uint16_t port = ready.get_future().get();
  auto log = std::make_shared<RequestLog>();
  RemoteModel remote(tcp_factory("remote:127.0.0.1:" + std::to_string(port)), 4, log);
  for (Bit b : {Bit(0), Bit(1)}) {
    const PromptState s{X(2), {{X(0), b}, {X(1), 1}}};
    CHECK(remote.value_p1(s, X(2)) == model.value_p1(s, X(2)));
    CHECK(remote.next_variable(s) == model.next_variable(s));
  }
  // Concurrent callers get separate pooled connections.
  std::vector<std::thread> callers;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    callers.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        const PromptState s{X(2), {{X(0), Bit(i % 2)}}};
        if (remote.value_p1(s, X(2)) != model.value_p1(s, X(2))) ++mismatches;
      }
    });
  }
  for (auto& c : callers) c.join();
  CHECK(mismatches == 0);
  CHECK(log->lines().size() == 4 + 200);
  CHECK(log->lines()[0] == value_dist_request({X(2), {{X(0), 0}, {X(1), 1}}}, X(2)));
  stop = true;
  server.join();
}

TEST_CASE("unreachable server") {
  auto factory = tcp_factory("127.0.0.1:1", std::chrono::milliseconds(500));
  try {
    factory();
    FAIL("expected remote_unavailable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::remote_unavailable);
  }
  CHECK_THROWS_AS(tcp_factory("nonsense"), Error);
}

TEST_CASE("stream server") {
  const auto model = small_model();
  std::istringstream in(value_dist_request({X(2), {{X(0), 1}}}, X(2)) + "\n\nnot json\n");
  std::ostringstream out;
  serve_stream(model, in, out);
  std::istringstream lines(out.str());
  std::string l1, l2, extra;
  std::getline(lines, l1);
  std::getline(lines, l2);
  CHECK(json::parse(l1).contains("p1"));
  CHECK(json::parse(l2).at("error") == "parse_error");
  CHECK_FALSE(std::getline(lines, extra));
}

TEST_CASE("stdio transport") {
  StdioTransport cat({"/bin/cat"});
  CHECK(cat.round_trip("{\"p1\":0.5}") == "{\"p1\":0.5}");
  StdioTransport quits({"/bin/true"}, std::chrono::milliseconds(500));
  CHECK_THROWS_AS(quits.round_trip("{}"), Error);
}
