#pragma once

// Grid-function dumps. Layout is row-major over axes (axis 0 slowest), each
// axis in increasing coordinate order. CSV rows end in CRLF.

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hartree/fingerprint.hpp"
#include "hartree/grid.hpp"
#include "json.hpp"

namespace hartree {

inline constexpr std::string_view kCrlf = "\r\n";

/// Header `[fingerprint,]x0[,x1[,x2]],value`, one row per node.
template <GridField F>
void write_grid_csv(std::ostream& os, const F& f, std::string_view fingerprint = {}) {
  const GridSpec& g = f.grid();
  const auto v = f.values();
  if (!fingerprint.empty()) os << "fingerprint,";
  for (int a = 0; a < g.dim(); ++a) os << 'x' << a << ',';
  os << "value" << kCrlf;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!fingerprint.empty()) os << fingerprint << ',';
    const Point x = g.node(i);
    for (int a = 0; a < g.dim(); ++a) os << format_double(x[a]) << ',';
    os << format_double(v[i]) << kCrlf;
  }
}

template <GridField F>
nlohmann::json grid_to_json(const F& f) {
  const GridSpec& g = f.grid();
  nlohmann::json j;
  j["dim"] = g.dim();
  j["half_width"] = g.half_width();
  j["points_per_axis"] = g.points_per_axis();
  j["layout"] = "row-major, axis 0 slowest, increasing coordinates";
  j["values"] = std::vector<double>(f.values().begin(), f.values().end());
  return j;
}

inline GridFunction grid_from_json(const nlohmann::json& j, FieldRole role = FieldRole::field) {
  const GridSpec g = make_grid(j.at("dim").get<int>(), j.at("half_width").get<double>(),
                               j.at("points_per_axis").get<int>());
  return GridFunction(g, j.at("values").get<std::vector<double>>(), role);
}

/// Minimal RFC 4180 table writer: quotes fields containing , " CR or LF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os_ << ',';
      write_field(fields[i]);
    }
    os_ << kCrlf;
    return *this;
  }

 private:
  void write_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
      os_ << s;
      return;
    }
    os_ << '"';
    for (char c : s) {
      if (c == '"') os_ << '"';
      os_ << c;
    }
    os_ << '"';
  }

  std::ostream& os_;
};

}  // namespace hartree
