#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "locality_lab/graph.hpp"

namespace locality_lab {

inline constexpr int kNetFormatVersion = 1;

/// Versioned JSON document:
///   {"version":1,"n_nodes":N,"edges":[[p,c],...],
///    "cpts":{"X<i>":{"parents":["X<j>",...],"table":[p,...]},...}}
/// Table entries use 17 significant digits so parsing restores every
/// double exactly.
std::string net_to_json(const BayesNet& net);
BayesNet net_from_json(std::string_view text);

/// Dag alone, as {"n_nodes":N,"edges":[[p,c],...]}.
std::string dag_to_json(const Dag& dag);
Dag dag_from_json(std::string_view text);

/// Shortest decimal text that keeps 17 significant digits.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view contents);

void save_net(const BayesNet& net, const std::filesystem::path& path);
BayesNet load_net(const std::filesystem::path& path);

}  // namespace locality_lab
