#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "distortion_lab/core.hpp"
#include "distortion_lab/field.hpp"

namespace distortion_lab {

/// Shortest text that reads back to the same double (at most 17 digits).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace detail {

inline void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

inline double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

inline double parse_grid_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidInput, "QCGRID header: bad " + what + " '" + s + "'");
  }
}

}  // namespace detail

/// Header line "QCGRID v1 n=<n> res=<r1,...> box=<lo1,hi1;...>" then the node
/// n-vectors as little-endian float64, row-major with the last axis fastest.
inline void write_qcgrid(std::ostream& os, const GridMapping& m) {
  const GridMapping s = m.analytic() ? m.sample() : m;
  const int n = s.dim();
  os << "QCGRID v1 n=" << n << " res=";
  for (int i = 0; i < n; ++i) os << (i ? "," : "") << s.resolution()[static_cast<std::size_t>(i)];
  os << " box=";
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << (i ? ";" : "") << format_double(s.box().lo[k]) << "," << format_double(s.box().hi[k]);
  }
  os << "\n";
  for (double v : s.nodes()) detail::put_le(os, v);
  if (!os) throw Error(ErrorCode::Io, "QCGRID: write failed");
}

inline GridMapping read_qcgrid(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::InvalidInput, "QCGRID: missing header line");
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "QCGRID" || version != "v1") throw Error(ErrorCode::InvalidInput, "QCGRID: header must start with 'QCGRID v1'");
  int n = -1;
  std::vector<int> res;
  Box box;
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidInput, "QCGRID header: malformed field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "n") {
      n = static_cast<int>(detail::parse_grid_double(val, "n"));
    } else if (key == "res") {
      for (const auto& r : detail::split(val, ',')) {
        const double v = detail::parse_grid_double(r, "resolution");
        if (v < 1 || v != std::floor(v)) throw Error(ErrorCode::InvalidInput, "QCGRID header: bad resolution '" + r + "'");
        res.push_back(static_cast<int>(v));
      }
    } else if (key == "box") {
      for (const auto& axis : detail::split(val, ';')) {
        const auto ends = detail::split(axis, ',');
        if (ends.size() != 2) throw Error(ErrorCode::InvalidInput, "QCGRID header: box axis '" + axis + "' needs lo,hi");
        box.lo.push_back(detail::parse_grid_double(ends[0], "box bound"));
        box.hi.push_back(detail::parse_grid_double(ends[1], "box bound"));
      }
    } else {
      throw Error(ErrorCode::InvalidInput, "QCGRID header: unknown field '" + key + "'");
    }
  }
  if (n < 2) throw Error(ErrorCode::InvalidInput, "QCGRID header: n must be >= 2");
  if (static_cast<int>(res.size()) != n || box.dim() != n) {
    throw Error(ErrorCode::InvalidInput, "QCGRID header: res and box must have n entries");
  }
  box.validate("QCGRID");
  std::size_t count = static_cast<std::size_t>(n);
  for (int r : res) count *= static_cast<std::size_t>(r) + 1;
  std::vector<unsigned char> raw(count * 8);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw Error(ErrorCode::InvalidInput, "QCGRID: expected " + std::to_string(count) + " float64 values, file is short");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::InvalidInput, "QCGRID: trailing bytes after node data");
  std::vector<double> nodes(count);
  for (std::size_t i = 0; i < count; ++i) {
    nodes[i] = detail::get_le(raw.data() + 8 * i);
    if (!std::isfinite(nodes[i])) throw Error(ErrorCode::InvalidInput, "QCGRID: non-finite node value at " + std::to_string(i));
  }
  return GridMapping::sampled(std::move(box), std::move(res), std::move(nodes));
}

inline void save_qcgrid(const std::string& path, const GridMapping& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_qcgrid(os, m);
}

inline GridMapping load_qcgrid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_qcgrid(is);
}

/// One row per cell: index, J, op_norm, K, P.
inline void write_dilatation_csv(std::ostream& os, const DilatationField& f) {
  os << "index,J,op_norm,K,P\n";
  for (std::size_t c = 0; c < f.size(); ++c) {
    os << c << "," << format_double(f.J[c]) << "," << format_double(f.op_norm[c]) << "," << format_double(f.K[c]) << ","
       << format_double(f.P[c]) << "\n";
  }
  if (!os) throw Error(ErrorCode::Io, "dilatation CSV: write failed");
}

}  // namespace distortion_lab
