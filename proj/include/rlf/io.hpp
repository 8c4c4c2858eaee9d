#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlf/bracket.hpp"
#include "rlf/fields.hpp"
#include "rlf/flow.hpp"
#include "rlf/weakcalc.hpp"

namespace rlf {

/// "%.17g": enough digits to parse back to the same double. Reruns with
/// the same inputs therefore give identical bytes.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Trajectory

template <int Dim>
void write_trajectory_csv(std::ostream& os, const Trajectory<Dim>& tr) {
  os << "t";
  for (int i = 1; i <= Dim; ++i) os << ",z_" << i;
  if (tr.has_density()) os << ",xi";
  if (tr.has_jacobian())
    for (int i = 1; i <= Dim; ++i)
      for (int j = 1; j <= Dim; ++j) os << ",J_" << i << j;
  os << '\n';
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << fmt(tr.times[k]);
    for (int i = 0; i < Dim; ++i) os << ',' << fmt(tr.states[k][i]);
    if (tr.has_density()) os << ',' << fmt(tr.density[k]);
    if (tr.has_jacobian())
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) os << ',' << fmt(tr.jacobian[k](i, j));
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// GridField: header (dim, box, spacing) then row-major node vectors.

template <int Dim>
void write_grid_csv(std::ostream& os, const GridField<Dim>& g) {
  os << "dim," << Dim << '\n' << "lo";
  for (int i = 0; i < Dim; ++i) os << ',' << fmt(g.box.lo[i]);
  os << '\n' << "hi";
  for (int i = 0; i < Dim; ++i) os << ',' << fmt(g.box.hi[i]);
  os << '\n' << "spacing," << fmt(g.spacing) << '\n';
  for (const auto& v : g.samples) {
    for (int i = 0; i < Dim; ++i) os << (i ? "," : "") << fmt(v[i]);
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInputError("grid csv: malformed number '" + s + "'");
  }
  if (used != s.size()) throw InvalidInputError("grid csv: malformed number '" + s + "'");
  return v;
}

template <int Dim>
Vec<Dim> header_vector(std::istream& is, const char* key) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInputError(std::string("grid csv: missing ") + key);
  const auto cells = split_csv(line);
  if (cells.size() != Dim + 1 || cells[0] != key) throw InvalidInputError(std::string("grid csv: bad ") + key + " row");
  Vec<Dim> v;
  for (int i = 0; i < Dim; ++i) v[i] = parse_double(cells[i + 1]);
  return v;
}

}  // namespace detail

template <int Dim>
GridField<Dim> read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "dim," + std::to_string(Dim))
    throw InvalidInputError("grid csv: dimension header does not match " + std::to_string(Dim));
  Box<Dim> box;
  box.lo = detail::header_vector<Dim>(is, "lo");
  box.hi = detail::header_vector<Dim>(is, "hi");
  const auto h = detail::header_vector<1>(is, "spacing");
  GridField<Dim> g(box, h[0]);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!std::getline(is, line)) throw InvalidInputError("grid csv: truncated data");
    const auto cells = detail::split_csv(line);
    if (cells.size() != Dim) throw InvalidInputError("grid csv: row " + std::to_string(k) + " has wrong width");
    for (int i = 0; i < Dim; ++i) g.samples[k][i] = detail::parse_double(cells[i]);
  }
  return g;
}

// Binary layout, native little-endian: int32 dim, dim doubles lo, dim doubles
// hi, double spacing, then dim doubles per node.
template <int Dim>
void write_grid_binary(std::ostream& os, const GridField<Dim>& g) {
  const std::int32_t d = Dim;
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  os.write(reinterpret_cast<const char*>(g.box.lo.data()), sizeof(double) * Dim);
  os.write(reinterpret_cast<const char*>(g.box.hi.data()), sizeof(double) * Dim);
  os.write(reinterpret_cast<const char*>(&g.spacing), sizeof(double));
  for (const auto& v : g.samples) os.write(reinterpret_cast<const char*>(v.data()), sizeof(double) * Dim);
}

template <int Dim>
GridField<Dim> read_grid_binary(std::istream& is) {
  std::int32_t d = 0;
  if (!is.read(reinterpret_cast<char*>(&d), sizeof d) || d != Dim)
    throw InvalidInputError("grid binary: dimension header does not match " + std::to_string(Dim));
  Box<Dim> box;
  double h = 0.0;
  is.read(reinterpret_cast<char*>(box.lo.data()), sizeof(double) * Dim);
  is.read(reinterpret_cast<char*>(box.hi.data()), sizeof(double) * Dim);
  is.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!is) throw InvalidInputError("grid binary: truncated header");
  GridField<Dim> g(box, h);
  for (auto& v : g.samples)
    if (!is.read(reinterpret_cast<char*>(v.data()), sizeof(double) * Dim))
      throw InvalidInputError("grid binary: truncated data");
  return g;
}

// ---------------------------------------------------------------------------
// Defect rows and weak reports

// The budget column carries the composed tolerance the verdict was taken
// against (integrator budget plus quadrature error).
inline void write_defect_csv(std::ostream& os, const std::vector<DefectRow>& rows) {
  os << "t,s,q,defect,budget,verdict\n";
  for (const auto& r : rows)
    os << fmt(r.t) << ',' << fmt(r.s) << ',' << fmt(r.q) << ',' << fmt(r.defect) << ',' << fmt(r.tolerance) << ','
       << (r.small ? "pass" : "fail") << '\n';
}

using ParamMap = std::map<std::string, double>;

/// {experiment, params, value, error_estimate, tolerance, verdict}. Doubles
/// are dumped in shortest round-trip form; non-finite values become null.
inline nlohmann::ordered_json weak_report_json(const WeakReport& r, const ParamMap& params = {}) {
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (const auto& [k, v] : params) p[k] = v;
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["params"] = p;
  j["value"] = r.value;
  j["error_estimate"] = r.quadrature_error_estimate;
  j["tolerance"] = r.tolerance;
  j["verdict"] = r.verdict();
  return j;
}

inline void write_weak_reports_json(std::ostream& os, const std::vector<std::pair<WeakReport, ParamMap>>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [r, p] : reports) arr.push_back(weak_report_json(r, p));
  os << arr.dump(2) << '\n';
}

}  // namespace rlf
