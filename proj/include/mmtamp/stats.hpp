#pragma once

// Summary report from stats.json and timings.json.

#include <iomanip>
#include <sstream>

#include "mmtamp/scenario_io.hpp"

namespace mmtamp {

/// Column names in report order.
inline const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols = {"#V",  "#E", "t_map", "t_anno", "#B",     "#X", "#C",
                                                "t_T", "t_T_dagger", "t_T_star", "#g", "#N", "#rSIPP",
                                                "t_P", "eta", "makespan"};
  return cols;
}

namespace detail {

inline json lookup(const json& j, const char* section, const char* key) {
  if (!j.contains(section) || !j.at(section).contains(key)) return nullptr;
  return j.at(section).at(key);
}

inline json timing(const json& t, const char* key) {
  return t.contains(key) ? t.at(key) : json(nullptr);
}

}  // namespace detail

/// One flat record holding every report column (null when the stage did not run).
inline json table_row(const json& stats, const json& timings) {
  using detail::lookup;
  using detail::timing;
  json r = json::object();
  r["#V"] = lookup(stats, "path_finding", "V");
  r["#E"] = lookup(stats, "path_finding", "E");
  // roadmap timings cover both roadmap families
  const auto add = [&](const char* a, const char* b) -> json {
    if (!timings.contains(a) || !timings.contains(b)) return nullptr;
    return std::round((timings.at(a).get<double>() + timings.at(b).get<double>()) * 1000.0) / 1000.0;
  };
  r["t_map"] = add("t_map", "t_full_map");
  r["t_anno"] = add("t_anno", "t_full_anno");
  r["#B"] = lookup(stats, "assignment", "B");
  r["#X"] = lookup(stats, "assignment", "X");
  r["#C"] = lookup(stats, "assignment", "C");
  r["t_T"] = timing(timings, "t_T");
  r["t_T_dagger"] = timing(timings, "t_T_dagger");
  r["t_T_star"] = timing(timings, "t_T_star");
  r["#g"] = lookup(stats, "path_finding", "g");
  r["#N"] = lookup(stats, "path_finding", "N");
  r["#rSIPP"] = lookup(stats, "path_finding", "rSIPP");
  r["t_P"] = timing(timings, "t_P");
  r["eta"] = lookup(stats, "path_finding", "eta");
  r["makespan"] = stats.contains("makespan") ? stats.at("makespan") : json(nullptr);
  return r;
}

inline std::string format_cell(const std::string& col, const json& v) {
  if (v.is_null()) return "-";
  std::ostringstream os;
  if (v.is_number_integer() || v.is_number_unsigned()) {
    os << v.get<long long>();
  } else if (v.is_number()) {
    const double x = v.get<double>();
    if (col == "eta")
      os << std::fixed << std::setprecision(2) << x * 100.0 << "%";
    else if (col == "#V" || col == "#E")
      os << std::fixed << std::setprecision(1) << x;
    else
      os << std::fixed << std::setprecision(3) << x;
  } else {
    os << v.dump();
  }
  return os.str();
}

/// Human-readable table: one header line and one value line.
inline std::string format_table(const json& row) {
  const auto& cols = table_columns();
  std::vector<std::string> cells;
  std::vector<std::size_t> width;
  for (const auto& c : cols) {
    cells.push_back(format_cell(c, row.value(c, json(nullptr))));
    width.push_back(std::max(c.size(), cells.back().size()));
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << cols[i];
  os << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << cells[i];
  os << "\n";
  return os.str();
}

}  // namespace mmtamp
