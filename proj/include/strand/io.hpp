#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "strand/flows.hpp"

namespace strand {

// ---------------------------------------------------------------------------
// Binary field snapshots: header (grid dims, degree, value kind) followed by
// the row-major coefficient array, little-endian 64-bit floats.
// ---------------------------------------------------------------------------
namespace snapshot {

inline constexpr char kMagic[8] = {'S', 'T', 'R', 'A', 'N', 'D', 'F', '1'};

struct Header {
  std::int32_t n = 0;
  std::int32_t sizes[4] = {0, 0, 0, 0};
  double lengths[4] = {0, 0, 0, 0};
  std::int32_t degree = 0;
  std::int32_t value_kind = 0;  // 0 scalar, 1 complex, 2 lie
  std::int32_t ldim = 1;
};

inline void write_u32(std::ostream& os, std::int32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (std::uint32_t(v) >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::int32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return std::int32_t(v);
}
inline void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

template <class T>
void write_field(const std::string& path, const Field<T>& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open snapshot file for writing: " + path);
  os.write(kMagic, 8);
  const PeriodicGrid& g = *f.grid;
  write_u32(os, g.n);
  for (int i = 0; i < 4; ++i) write_u32(os, g.sizes[i]);
  for (int i = 0; i < 4; ++i) write_f64(os, g.lengths[i]);
  write_u32(os, f.degree);
  bool complex_kind = std::is_same_v<T, cplx>;
  write_u32(os, complex_kind ? 1 : (f.ldim > 1 ? 2 : 0));
  write_u32(os, f.ldim);
  for (const auto& v : f.data) {
    if constexpr (std::is_same_v<T, cplx>) {
      write_f64(os, v.real());
      write_f64(os, v.imag());
    } else {
      write_f64(os, v);
    }
  }
}

inline RForm read_real_field(const std::string& path, const PeriodicGrid& expect) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open snapshot file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw config_error("bad snapshot magic in " + path);
  std::int32_t n = read_u32(is);
  std::int32_t sizes[4];
  for (int i = 0; i < 4; ++i) sizes[i] = read_u32(is);
  double lengths[4];
  for (int i = 0; i < 4; ++i) lengths[i] = read_f64(is);
  (void)lengths;
  std::int32_t degree = read_u32(is);
  std::int32_t kind = read_u32(is);
  std::int32_t ldim = read_u32(is);
  if (n != expect.n) throw config_error("snapshot grid mismatch");
  for (int i = 0; i < 2 * n; ++i)
    if (sizes[i] != expect.sizes[i]) throw config_error("snapshot grid mismatch");
  if (kind == 1) throw config_error("expected a real snapshot");
  RForm out(expect, degree, ldim);
  for (auto& v : out.data) v = read_f64(is);
  return out;
}

}  // namespace snapshot

// ---------------------------------------------------------------------------
// Trajectory CSV (RFC-4180-style: CRLF line ends, header row, UTF-8) and the
// column manifest.
// ---------------------------------------------------------------------------
struct CsvColumn {
  std::string name;
  std::string description;
};

inline std::vector<CsvColumn> monitor_columns(int phi_levels) {
  std::vector<CsvColumn> cols = {
      {"t", "flow time"},
      {"bianchi_residual", "sup norm of the anomaly identity residual"},
      {"min_eig_g", "minimum metric eigenvalue over the grid (or of G)"},
      {"dilaton_value", "dilaton functional of the current Hermitian form"},
      {"scalar_min", "minimum of the generalized scalar curvature"},
      {"sup_F", "sup norm of the connection curvature"},
  };
  for (int k = 0; k <= phi_levels; ++k)
    cols.push_back({"phi_" + std::to_string(k), "scale-invariant C^k diagnostic against the fixture background"});
  cols.push_back({"dM_dt_formula", "displayed two-term value of the dilaton derivative"});
  cols.push_back({"dM_dt_numeric", "centered difference of the dilaton functional"});
  cols.push_back({"tr_GF", "sup of tr_{G_t} G_F against the flat block metric"});
  cols.push_back({"upsilon_sq", "sup of |Upsilon(G_t, G_F)|^2"});
  cols.push_back({"lambda", "lowest eigenvalue of the Schrodinger operator"});
  return cols;
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(const std::string& path, const std::vector<MonitorRecord>& recs,
                                 int phi_levels = 2) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open CSV for writing: " + path);
  auto cols = monitor_columns(phi_levels);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    os << cols[i].name;
    if (i + 1 < cols.size()) os << ",";
  }
  os << "\r\n";
  for (const auto& r : recs) {
    std::vector<double> vals = {r.t,         r.bianchi_residual, r.min_eig_g, r.dilaton_value,
                                r.scalar_min, r.sup_F};
    for (int k = 0; k <= phi_levels; ++k) vals.push_back(r.phi[k]);
    vals.push_back(r.dM_dt_formula);
    vals.push_back(r.dM_dt_numeric);
    vals.push_back(r.tr_GF);
    vals.push_back(r.upsilon_sq);
    vals.push_back(r.lambda);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      os << format_g17(vals[i]);
      if (i + 1 < vals.size()) os << ",";
    }
    os << "\r\n";
  }
}

inline void write_column_manifest(const std::string& path, int phi_levels = 2) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open manifest for writing: " + path);
  os << "{\n  \"columns\": [\n";
  auto cols = monitor_columns(phi_levels);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    os << "    {\"name\": \"" << cols[i].name << "\", \"description\": \"" << cols[i].description
       << "\"}";
    os << (i + 1 < cols.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
}

// parse a trajectory CSV back into rows of doubles (Na) for replay
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open CSV: " + path);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      header = cells;
      first = false;
    } else {
      std::vector<double> vals;
      for (auto& c : cells) vals.push_back(std::strtod(c.c_str(), nullptr));
      rows.push_back(std::move(vals));
    }
  }
  return {header, rows};
}

// ---------------------------------------------------------------------------
// Minimal SVG line charts for monitor columns (no external plotting contract).
// ---------------------------------------------------------------------------
inline void write_svg_line_plot(const std::string& path, const std::string& title,
                                const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open SVG for writing: " + path);
  const int W = 640, H = 400, ML = 70, MR = 20, MT = 40, MB = 45;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    pts.emplace_back(xs[i], ys[i]);
    xmin = std::min(xmin, xs[i]);
    xmax = std::max(xmax, xs[i]);
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  if (pts.empty()) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) {
    ymax = ymin + 1;
    ymin -= 1;
  }
  auto X = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto Y = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << ML - 8 << "\" y=\"" << Y(ymin) << "\" text-anchor=\"end\" font-size=\"11\">"
     << format_g17(ymin).substr(0, 10) << "</text>\n";
  os << "<text x=\"" << ML - 8 << "\" y=\"" << Y(ymax) + 5
     << "\" text-anchor=\"end\" font-size=\"11\">" << format_g17(ymax).substr(0, 10) << "</text>\n";
  os << "<text x=\"" << X(xmax) << "\" y=\"" << H - MB + 28
     << "\" text-anchor=\"end\" font-size=\"11\">t = " << format_g17(xmax).substr(0, 10)
     << "</text>\n";
  if (!pts.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (auto& [x, y] : pts) os << X(x) << "," << Y(y) << " ";
    os << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace strand
