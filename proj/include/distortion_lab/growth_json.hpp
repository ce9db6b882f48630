#pragma once

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "distortion_lab/core.hpp"
#include "distortion_lab/growth.hpp"

namespace distortion_lab {

using json = nlohmann::ordered_json;

/// Extended reals in JSON: finite values are numbers, infinities the strings
/// "inf" / "-inf", NaN the string "nan".
inline json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

inline json json_numbers(const std::vector<double>& vs) {
  json out = json::array();
  for (double v : vs) out.push_back(json_number(v));
  return out;
}

inline double read_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity" || s == "Infinity") return kInf;
    if (s == "-inf" || s == "-infinity") return -kInf;
  }
  throw Error(ErrorCode::InvalidInput, path + ": expected a number or \"inf\"");
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::InvalidInput, path + "." + key + ": missing field");
  }
  return j.at(key);
}

inline double read_field(const json& j, const char* key, const std::string& path) {
  return read_number(require(j, key, path), path + "." + key);
}

inline double read_field_or(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return read_number(j.at(key), path + "." + key);
}

inline PieceKind parse_piece_kind(const std::string& s, const std::string& path) {
  if (s == "constant") return PieceKind::constant;
  if (s == "linear") return PieceKind::linear;
  if (s == "power") return PieceKind::power;
  if (s == "logpow") return PieceKind::logpow;
  if (s == "exp") return PieceKind::exp;
  if (s == "tabulated") return PieceKind::tabulated;
  throw Error(ErrorCode::InvalidInput, path + ": unknown piece kind \"" + s + "\"");
}

/// Growth-function DSL:
///   {"label": str, "pieces": [{"from", "to", "kind", "coeffs", "add"?}],
///    "T0"?: num|"inf", "points"?: {"0"|"T0"|"inf": num|"inf"},
///    "monotone"?: bool}
inline GrowthFunction parse_growth(const json& j, const std::string& path = "phi") {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, path + ": expected an object");
  const json& pj = require(j, "pieces", path);
  if (!pj.is_array() || pj.empty()) throw Error(ErrorCode::InvalidInput, path + ".pieces: expected a non-empty array");
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < pj.size(); ++i) {
    const std::string where = path + ".pieces[" + std::to_string(i) + "]";
    const json& e = pj[i];
    Piece p;
    p.from = read_field(e, "from", where);
    p.to = read_field(e, "to", where);
    const json& kind = require(e, "kind", where);
    if (!kind.is_string()) throw Error(ErrorCode::InvalidInput, where + ".kind: expected a string");
    p.kind = parse_piece_kind(kind.get<std::string>(), where + ".kind");
    const json& cj = require(e, "coeffs", where);
    if (!cj.is_array()) throw Error(ErrorCode::InvalidInput, where + ".coeffs: expected an array");
    for (std::size_t k = 0; k < cj.size(); ++k) {
      p.coeffs.push_back(read_number(cj[k], where + ".coeffs[" + std::to_string(k) + "]"));
    }
    if (e.contains("add")) {
      const json& aj = e.at("add");
      if (!aj.is_array() || aj.size() != 2) throw Error(ErrorCode::InvalidInput, where + ".add: expected [add0, add1]");
      p.add0 = read_number(aj[0], where + ".add[0]");
      p.add1 = read_number(aj[1], where + ".add[1]");
    }
    pieces.push_back(std::move(p));
  }
  std::string label = "phi";
  if (j.contains("label")) {
    if (!j.at("label").is_string()) throw Error(ErrorCode::InvalidInput, path + ".label: expected a string");
    label = j.at("label").get<std::string>();
  }
  GrowthFunction g(std::move(pieces), label);
  if (j.contains("T0")) {
    const double T0 = read_number(j.at("T0"), path + ".T0");
    if (!(T0 > 0.0)) throw Error(ErrorCode::InvalidInput, path + ".T0: must be positive");
    g = g.with_domain_end(T0);
  }
  if (j.contains("points")) {
    const json& pts = j.at("points");
    if (!pts.is_object()) throw Error(ErrorCode::InvalidInput, path + ".points: expected an object");
    for (auto it = pts.begin(); it != pts.end(); ++it) {
      const std::string where = path + ".points." + it.key();
      const double v = read_number(it.value(), where);
      if (it.key() == "0") {
        g = g.with_value_at_zero(v);
      } else if (it.key() == "T0") {
        g = g.with_value_at_domain_end(v);
      } else if (it.key() == "inf") {
        g = g.with_value_at_infinity(v);
      } else {
        throw Error(ErrorCode::InvalidInput, where + ": only \"0\", \"T0\" and \"inf\" may be overridden");
      }
    }
  }
  if (j.contains("monotone")) {
    if (!j.at("monotone").is_boolean()) throw Error(ErrorCode::InvalidInput, path + ".monotone: expected a boolean");
    g = g.with_monotone(j.at("monotone").get<bool>());
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidInput, path + "." + std::string(e.what()).substr(std::string("InvalidInput: ").size()));
  }
  return g;
}

/// Symbolic description; custom pieces are reported by kind only.
inline json growth_to_json(const GrowthFunction& g) {
  json out;
  out["label"] = g.label();
  json pieces = json::array();
  for (const Piece& p : g.pieces()) {
    json e;
    e["from"] = json_number(p.from);
    e["to"] = json_number(p.to);
    e["kind"] = to_string(p.kind);
    e["coeffs"] = json_numbers(p.coeffs);
    if (p.add0 != 0.0 || p.add1 != 0.0) e["add"] = json::array({p.add0, p.add1});
    pieces.push_back(e);
  }
  out["pieces"] = pieces;
  out["T0"] = json_number(g.domain_end());
  if (g.arg_exponent() != 1.0) out["arg_exponent"] = g.arg_exponent();
  json pts = json::object();
  if (g.value_at_zero()) pts["0"] = json_number(*g.value_at_zero());
  if (g.value_at_domain_end()) pts["T0"] = json_number(*g.value_at_domain_end());
  if (g.value_at_infinity()) pts["inf"] = json_number(*g.value_at_infinity());
  if (!pts.empty()) out["points"] = pts;
  if (!g.monotone()) out["monotone"] = false;
  return out;
}

}  // namespace distortion_lab
