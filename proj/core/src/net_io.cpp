#include "locality_lab/net_io.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "locality_lab/error.hpp"

namespace locality_lab {

namespace {

using nlohmann::json;

void append_edges(std::string& out, const Dag& dag) {
  out += "[";
  bool first = true;
  for (const auto& [p, c] : dag.edges()) {
    if (!first) out += ",";
    first = false;
    out += "[" + std::to_string(p.index) + "," + std::to_string(c.index) + "]";
  }
  out += "]";
}

Dag parse_dag_fields(const json& doc) {
  const auto n = doc.at("n_nodes").get<std::size_t>();
  Dag dag(n);
  for (const auto& edge : doc.at("edges")) {
    if (!edge.is_array() || edge.size() != 2) {
      throw Error(Errc::parse_error, "edge entries must be [parent, child]");
    }
    dag.add_edge(VariableId{edge[0].get<std::uint32_t>()}, VariableId{edge[1].get<std::uint32_t>()});
  }
  return dag;
}

template <typename Fn>
auto with_json_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error(Errc::invalid_argument, "cannot format double");
  return std::string(buf, ptr);
}

std::string net_to_json(const BayesNet& net) {
  std::string out = "{\"version\":" + std::to_string(kNetFormatVersion) +
                    ",\"n_nodes\":" + std::to_string(net.size()) + ",\"edges\":";
  append_edges(out, net.dag());
  out += ",\"cpts\":{";
  for (std::size_t v = 0; v < net.size(); ++v) {
    const Cpt& cpt = net.cpts()[v];
    if (v) out += ",";
    out += "\n\"" + format_variable(cpt.owner) + "\":{\"parents\":[";
    for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
      if (k) out += ",";
      out += "\"" + format_variable(cpt.parents[k]) + "\"";
    }
    out += "],\"table\":[";
    for (std::size_t i = 0; i < cpt.table.size(); ++i) {
      if (i) out += ",";
      out += format_double(cpt.table[i]);
    }
    out += "]}";
  }
  out += "\n}}\n";
  return out;
}

BayesNet net_from_json(std::string_view text) {
  return with_json_errors([&] {
    const json doc = json::parse(text);
    const int version = doc.at("version").get<int>();
    if (version != kNetFormatVersion) {
      throw Error(Errc::parse_error, "unsupported net format version " + std::to_string(version));
    }
    Dag dag = parse_dag_fields(doc);
    const json& cpts_doc = doc.at("cpts");
    if (cpts_doc.size() != dag.size()) {
      throw Error(Errc::parse_error, "expected one CPT per node");
    }
    std::vector<Cpt> cpts(dag.size());
    std::vector<char> seen(dag.size(), 0);
    for (const auto& [name, entry] : cpts_doc.items()) {
      const VariableId owner = parse_variable(name);
      if (!dag.contains(owner) || seen[owner.index]) {
        throw Error(Errc::parse_error, "bad or duplicate CPT key " + name);
      }
      seen[owner.index] = 1;
      Cpt& cpt = cpts[owner.index];
      cpt.owner = owner;
      for (const auto& p : entry.at("parents")) cpt.parents.push_back(parse_variable(p.get<std::string>()));
      cpt.table = entry.at("table").get<std::vector<double>>();
    }
    return BayesNet(std::move(dag), std::move(cpts));
  });
}

std::string dag_to_json(const Dag& dag) {
  std::string out = "{\"n_nodes\":" + std::to_string(dag.size()) + ",\"edges\":";
  append_edges(out, dag);
  out += "}";
  return out;
}

Dag dag_from_json(std::string_view text) {
  return with_json_errors([&] { return parse_dag_fields(json::parse(text)); });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_net(const BayesNet& net, const std::filesystem::path& path) {
  write_file(path, net_to_json(net));
}

BayesNet load_net(const std::filesystem::path& path) { return net_from_json(read_file(path)); }

}  // namespace locality_lab
