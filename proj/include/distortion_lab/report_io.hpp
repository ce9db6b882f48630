#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "distortion_lab/construct.hpp"
#include "distortion_lab/criteria.hpp"
#include "distortion_lab/functional.hpp"
#include "distortion_lab/grid_io.hpp"
#include "distortion_lab/growth_json.hpp"

namespace distortion_lab {

inline json box_to_json(const Box& b) { return {{"lo", json_numbers(b.lo)}, {"hi", json_numbers(b.hi)}}; }

inline Box parse_box(const json& j, const std::string& path) {
  Box b;
  const json& lo = require(j, "lo", path);
  const json& hi = require(j, "hi", path);
  if (!lo.is_array() || !hi.is_array()) throw Error(ErrorCode::InvalidInput, path + ": lo and hi must be arrays");
  for (std::size_t i = 0; i < lo.size(); ++i) b.lo.push_back(read_number(lo[i], path + ".lo"));
  for (std::size_t i = 0; i < hi.size(); ++i) b.hi.push_back(read_number(hi[i], path + ".hi"));
  b.validate(path);
  return b;
}

inline Weight parse_weight(const json& j, const std::string& path) {
  if (!j.is_string()) throw Error(ErrorCode::InvalidInput, path + ": expected \"unit\" or \"spherical\"");
  const std::string s = j.get<std::string>();
  if (s == "unit") return Weight::unit();
  if (s == "spherical") return Weight::spherical();
  throw Error(ErrorCode::InvalidInput, path + ": unknown weight \"" + s + "\"");
}

inline int read_int(const json& j, const std::string& path, int lo, int hi) {
  if (!j.is_number_integer()) throw Error(ErrorCode::InvalidInput, path + ": expected an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > hi) {
    throw Error(ErrorCode::InvalidInput, path + ": " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                             std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

/// Sequence spec {"kind", "params", "n", "j_max"}; j_max is returned
/// separately because it drives the experiment, not the construction.
struct SequenceSpec {
  MappingSequence sequence;
  int j_max = 20;
};

inline SequenceSpec parse_sequence_spec(const json& j, const std::string& path = "sequence") {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, path + ": expected an object");
  const json& kj = require(j, "kind", path);
  if (!kj.is_string()) throw Error(ErrorCode::InvalidInput, path + ".kind: expected a string");
  const std::string kind = kj.get<std::string>();
  const int n = j.contains("n") ? read_int(j.at("n"), path + ".n", 2, 6) : 3;
  SequenceSpec out;
  if (j.contains("j_max")) out.j_max = read_int(j.at("j_max"), path + ".j_max", 3, 30);
  static const json empty = json::object();
  const json& p = j.contains("params") ? j.at("params") : empty;
  if (!p.is_object()) throw Error(ErrorCode::InvalidInput, path + ".params: expected an object");
  const std::string pp = path + ".params";
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        throw Error(ErrorCode::InvalidInput, pp + "." + it.key() + ": unknown parameter for " + kind);
      }
    }
  };
  try {
    if (kind == "laminate") {
      allow({"t1", "t2", "lambda"});
      out.sequence = laminate_sequence(read_field(p, "t1", pp), read_field(p, "t2", pp), read_field(p, "lambda", pp), n);
    } else if (kind == "collapse") {
      allow({"tau0", "tau_star"});
      out.sequence = collapse_sequence(read_field(p, "tau0", pp), read_field(p, "tau_star", pp), n);
    } else if (kind == "cantor") {
      allow({"tau0", "lambda"});
      const double tau0 = read_field(p, "tau0", pp);
      out.sequence = cantor_sequence(tau0, doubling_schedule(tau0), read_field(p, "lambda", pp), n);
    } else if (kind == "left_jump") {
      allow({"T"});
      const double T = read_field(p, "T", pp);
      out.sequence = left_jump_sequence(T, left_jump_schedule(T), n);
    } else if (kind == "constant") {
      allow({"c"});
      out.sequence = constant_sequence(affine_stretch(read_field_or(p, "c", pp, 1.0), n));
    } else {
      throw Error(ErrorCode::InvalidInput, path + ".kind: unknown sequence kind \"" + kind + "\"");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParamOutOfRange) throw Error(ErrorCode::InvalidInput, pp + ": " + e.what());
    throw;
  }
  return out;
}

inline json params_to_json(const MappingSequence& s) {
  json p = json::object();
  for (const auto& [k, v] : s.params) p[k] = json_number(v);
  return p;
}

inline json experiment_to_json(const SemicontinuityResult& r, const MappingSequence& seq, const FunctionalSpec& spec) {
  json out;
  out["limit_value"] = json_number(r.limit_value);
  out["sequence_values"] = json_numbers(r.values);
  out["liminf_estimate"] = json_number(r.liminf);
  out["verdict"] = to_string(r.verdict);
  out["phi_label"] = spec.phi.label();
  out["weight"] = spec.weight.label;
  out["omega"] = box_to_json(spec.region(seq.limit));
  out["liminf_source"] = r.liminf_source;
  out["margin"] = json_number(r.margin);
  out["tolerance"] = json_number(r.tolerance);
  out["tail_min"] = json_number(r.tail_min);
  out["tail_max"] = json_number(r.tail_max);
  out["uniform_bounds"] = json_numbers(r.bounds);
  out["mode"] = to_string(r.mode);
  out["sequence"] = {{"kind", to_string(seq.kind)}, {"n", seq.n}, {"params", params_to_json(seq)}};
  if (!seq.note.empty()) out["sequence"]["note"] = seq.note;
  if (!r.note.empty()) out["note"] = r.note;
  out["out_of_scope"] = "weak L^1 convergence of the derivatives is not tested";
  return out;
}

inline json condition_to_json(const ConditionReport& r) {
  json ev = json::array();
  for (const auto& [s, v] : r.evidence) ev.push_back(json::array({json_number(s), json_number(v)}));
  json out;
  out["id"] = r.id;
  out["verdict"] = to_string(r.verdict);
  out["certified"] = r.certified;
  out["method"] = r.method;
  out["evidence"] = ev;
  if (!r.note.empty()) out["note"] = r.note;
  return out;
}

inline json dispatch_to_json(const Dispatch& d) {
  json out;
  out["reason"] = to_string(d.reason);
  out["witness"] = d.witness;
  out["grid_points"] = d.grid_points;
  out["worst_drop"] = json_number(d.worst_drop);
  out["worst_convexity_gap"] = json_number(d.worst_convexity_gap);
  if (d.sequence) {
    out["sequence"] = {{"kind", to_string(d.sequence->kind)}, {"n", d.sequence->n}, {"params", params_to_json(*d.sequence)}};
  }
  return out;
}

/// Two-column CSV with a header row.
inline void write_series_csv(std::ostream& os, const std::string& xname, const std::string& yname,
                             const std::vector<std::pair<double, double>>& rows) {
  os << xname << "," << yname << "\n";
  for (const auto& [x, y] : rows) os << format_double(x) << "," << format_double(y) << "\n";
  if (!os) throw Error(ErrorCode::Io, "CSV: write failed");
}

/// Sequence values against j as a polyline with the limit value as a
/// horizontal reference line. Infinite values are clipped to the frame.
inline void write_sequence_svg(std::ostream& os, const std::vector<double>& values, double limit,
                               const std::string& title) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double lo = std::isfinite(limit) ? limit : kInf;
  double hi = std::isfinite(limit) ? limit : -kInf;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) lo -= 0.5, hi += 0.5;
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const std::size_t count = values.size();
  auto px = [&](std::size_t j) { return L + (W - L - R) * (count > 1 ? static_cast<double>(j - 1) / (count - 1) : 0.5); };
  auto py = [&](double v) {
    if (v == kInf || v > hi) return T;
    if (v < lo) return H - B;
    return T + (H - T - B) * (hi - v) / (hi - lo);
  };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto escape = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << escape(title) << "</text>\n";
  os << "<line x1=\"" << f(L) << "\" y1=\"" << f(H - B) << "\" x2=\"" << f(W - R) << "\" y2=\"" << f(H - B)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f(L) << "\" y1=\"" << f(T) << "\" x2=\"" << f(L) << "\" y2=\"" << f(H - B)
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << f(L - 6) << "\" y=\"" << f(py(v) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << format_double(std::round(v * 1e4) / 1e4) << "</text>\n";
  }
  for (std::size_t j = 1; j <= count; ++j) {
    if (count > 12 && j % 5 != 0 && j != 1) continue;
    os << "<text x=\"" << f(px(j)) << "\" y=\"" << f(H - B + 16) << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"11\">" << j << "</text>\n";
  }
  os << "<text x=\"" << f((L + W - R) / 2) << "\" y=\"" << f(H - 10)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">j</text>\n";
  if (std::isfinite(limit)) {
    os << "<line x1=\"" << f(L) << "\" y1=\"" << f(py(limit)) << "\" x2=\"" << f(W - R) << "\" y2=\"" << f(py(limit))
       << "\" stroke=\"firebrick\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << f(W - R - 4) << "\" y=\"" << f(py(limit) - 6)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"firebrick\">limit "
       << format_double(limit) << "</text>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t j = 1; j <= count; ++j) os << (j > 1 ? " " : "") << f(px(j)) << "," << f(py(values[j - 1]));
  os << "\"/>\n";
  for (std::size_t j = 1; j <= count; ++j) {
    os << "<circle cx=\"" << f(px(j)) << "\" cy=\"" << f(py(values[j - 1])) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  os << "</svg>\n";
  if (!os) throw Error(ErrorCode::Io, "SVG: write failed");
}

}  // namespace distortion_lab
