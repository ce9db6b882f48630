#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "distortion_lab/core.hpp"
#include "distortion_lab/quadrature.hpp"

namespace distortion_lab {

enum class PieceKind { constant, linear, power, logpow, exp, tabulated, custom };

inline const char* to_string(PieceKind k) noexcept {
  switch (k) {
    case PieceKind::constant: return "constant";
    case PieceKind::linear: return "linear";
    case PieceKind::power: return "power";
    case PieceKind::logpow: return "logpow";
    case PieceKind::exp: return "exp";
    case PieceKind::tabulated: return "tabulated";
    case PieceKind::custom: return "custom";
  }
  return "unknown";
}

/// Large-t behaviour of a growth function.
///   power_log:   coef * t^p * log^q t
///   exponential: coef * exp(k * t^beta * log^m t)
struct TailModel {
  enum class Kind { bounded, power_log, exponential, unknown };
  Kind kind = Kind::unknown;
  double coef = 0.0;
  double p = 0.0;
  double q = 0.0;
  double k = 0.0;
  double beta = 0.0;
  double m = 0.0;
  double limit = 0.0;

  static TailModel bounded(double limit) {
    TailModel t;
    t.kind = Kind::bounded;
    t.limit = limit;
    return t;
  }
  static TailModel power_log(double coef, double p, double q) {
    TailModel t;
    t.kind = Kind::power_log;
    t.coef = coef;
    t.p = p;
    t.q = q;
    return t;
  }
  static TailModel exponential(double coef, double k, double beta, double m) {
    TailModel t;
    t.kind = Kind::exponential;
    t.coef = coef;
    t.k = k;
    t.beta = beta;
    t.m = m;
    return t;
  }
  static TailModel unknown() { return {}; }

  /// Tail of t -> this(t^r).
  TailModel substitute_power(double r) const {
    TailModel t = *this;
    if (kind == Kind::power_log) {
      t.coef = coef * std::pow(r, q);
      t.p = p * r;
    } else if (kind == Kind::exponential) {
      t.k = k * std::pow(r, m);
      t.beta = beta * r;
    }
    return t;
  }

  /// Tail of this + add0 + add1 * t.
  TailModel plus_affine(double add0, double add1) const {
    if (add1 == 0.0) {
      TailModel t = *this;
      if (kind == Kind::bounded) t.limit += add0;
      return t;
    }
    const TailModel lin = power_log(add1, 1.0, 0.0);
    switch (kind) {
      case Kind::bounded: return lin;
      case Kind::exponential: return *this;
      case Kind::unknown: return *this;
      case Kind::power_log:
        if (p > 1.0 || (p == 1.0 && q > 0.0)) return *this;
        if (p < 1.0 || q < 0.0) return lin;
        return power_log(coef + add1, 1.0, 0.0);
    }
    return *this;
  }

  /// Whether t -> infinity makes the modelled function unbounded.
  bool unbounded() const {
    switch (kind) {
      case Kind::bounded: return false;
      case Kind::power_log: return coef > 0.0 && (p > 0.0 || (p == 0.0 && q > 0.0));
      case Kind::exponential: return coef > 0.0 && k > 0.0 && beta > 0.0;
      case Kind::unknown: return false;
    }
    return false;
  }
};

/// Formula supplied by closures. Both act on the piece variable s.
struct CustomPiece {
  std::function<double(double)> value;
  std::function<double(double)> slope;
  TailModel tail;
};

namespace detail {

/// s^p for s >= 0 with 0^0 = 1, 0^p = 0 (p > 0), 0^p = inf (p < 0).
inline double pow0(double s, double p) {
  if (s == 0.0) {
    if (p == 0.0) return 1.0;
    return p > 0.0 ? 0.0 : kInf;
  }
  return std::pow(s, p);
}

/// a * b with 0 * inf = 0.
inline double mul0(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

}  // namespace detail

/// One formula on the half-open interval [from, to) of the piece variable.
/// value(s) = base(s) + add0 + add1 * s.
struct Piece {
  double from = 0.0;
  double to = kInf;
  PieceKind kind = PieceKind::constant;
  std::vector<double> coeffs;
  double add0 = 0.0;
  double add1 = 0.0;
  std::shared_ptr<const CustomPiece> custom;

  double coeff(std::size_t i, double fallback = 0.0) const {
    return i < coeffs.size() ? coeffs[i] : fallback;
  }

  double base_value(double s) const {
    using detail::pow0;
    switch (kind) {
      case PieceKind::constant: return coeff(0);
      case PieceKind::linear: return coeff(0) + coeff(1) * s;
      case PieceKind::power: {
        const double a = coeff(0);
        return a == 0.0 ? 0.0 : a * pow0(s, coeff(1));
      }
      case PieceKind::logpow: {
        const double a = coeff(0);
        if (a == 0.0) return 0.0;
        const double c = coeff(3, kE);
        return a * detail::mul0(pow0(s, coeff(1)), std::pow(std::log(c + s), coeff(2)));
      }
      case PieceKind::exp: {
        const double a = coeff(0);
        const double k = coeff(1);
        const double beta = coeff(2);
        const double m = coeff(3);
        const double c = coeff(4, kE);
        const double lg = m == 0.0 ? 1.0 : std::pow(std::log(c + s), m);
        return a * std::exp(detail::mul0(k, detail::mul0(pow0(s, beta), lg)));
      }
      case PieceKind::tabulated: {
        const std::size_t count = coeffs.size() / 2;
        std::size_t k = 0;
        while (k + 2 < count && s >= coeffs[2 * (k + 1)]) ++k;
        const double x0 = coeffs[2 * k], y0 = coeffs[2 * k + 1];
        const double x1 = coeffs[2 * k + 2], y1 = coeffs[2 * k + 3];
        return y0 + (y1 - y0) * (s - x0) / (x1 - x0);
      }
      case PieceKind::custom: return custom->value(s);
    }
    return 0.0;
  }

  double base_slope(double s) const {
    using detail::mul0;
    using detail::pow0;
    switch (kind) {
      case PieceKind::constant: return 0.0;
      case PieceKind::linear: return coeff(1);
      case PieceKind::power: {
        const double a = coeff(0), p = coeff(1);
        if (a == 0.0 || p == 0.0) return 0.0;
        return a * p * pow0(s, p - 1.0);
      }
      case PieceKind::logpow: {
        const double a = coeff(0), p = coeff(1), q = coeff(2), c = coeff(3, kE);
        if (a == 0.0) return 0.0;
        const double L = std::log(c + s);
        const double t1 = p == 0.0 ? 0.0 : mul0(p * pow0(s, p - 1.0), std::pow(L, q));
        const double t2 = q == 0.0 ? 0.0 : mul0(pow0(s, p), q * std::pow(L, q - 1.0) / (c + s));
        return a * (t1 + t2);
      }
      case PieceKind::exp: {
        const double k = coeff(1), beta = coeff(2), m = coeff(3), c = coeff(4, kE);
        if (k == 0.0 || beta == 0.0) {
          if (k == 0.0 || m == 0.0) return 0.0;
        }
        const double L = std::log(c + s);
        const double Lm = m == 0.0 ? 1.0 : std::pow(L, m);
        const double d1 = beta == 0.0 ? 0.0 : mul0(beta * pow0(s, beta - 1.0), Lm);
        const double d2 = m == 0.0 ? 0.0 : mul0(pow0(s, beta), m * std::pow(L, m - 1.0) / (c + s));
        return mul0(base_value(s) * k, d1 + d2);
      }
      case PieceKind::tabulated: {
        const std::size_t count = coeffs.size() / 2;
        std::size_t k = 0;
        while (k + 2 < count && s >= coeffs[2 * (k + 1)]) ++k;
        return (coeffs[2 * k + 3] - coeffs[2 * k + 1]) / (coeffs[2 * k + 2] - coeffs[2 * k]);
      }
      case PieceKind::custom: return custom->slope(s);
    }
    return 0.0;
  }

  double value(double s) const { return base_value(s) + add0 + add1 * s; }
  double slope(double s) const { return base_slope(s) + add1; }

  /// Whether the formula is constant on its whole interval.
  bool flat() const {
    if (add1 != 0.0) return false;
    switch (kind) {
      case PieceKind::constant: return true;
      case PieceKind::linear: return coeff(1) == 0.0;
      case PieceKind::power: return coeff(0) == 0.0 || coeff(1) == 0.0;
      case PieceKind::logpow: return coeff(0) == 0.0 || (coeff(1) == 0.0 && coeff(2) == 0.0);
      case PieceKind::exp: return coeff(0) == 0.0 || coeff(1) == 0.0 || (coeff(2) == 0.0 && coeff(3) == 0.0);
      default: return false;
    }
  }

  /// Tail behaviour in the piece variable.
  TailModel tail() const {
    TailModel base;
    switch (kind) {
      case PieceKind::constant: base = TailModel::bounded(coeff(0)); break;
      case PieceKind::linear:
        base = coeff(1) == 0.0 ? TailModel::bounded(coeff(0)) : TailModel::power_log(coeff(1), 1.0, 0.0);
        break;
      case PieceKind::power:
        if (coeff(0) == 0.0) {
          base = TailModel::bounded(0.0);
        } else if (coeff(1) <= 0.0) {
          base = TailModel::bounded(coeff(1) == 0.0 ? coeff(0) : 0.0);
        } else {
          base = TailModel::power_log(coeff(0), coeff(1), 0.0);
        }
        break;
      case PieceKind::logpow:
        if (coeff(0) == 0.0) {
          base = TailModel::bounded(0.0);
        } else if (coeff(1) == 0.0 && coeff(2) == 0.0) {
          base = TailModel::bounded(coeff(0));
        } else if (coeff(1) > 0.0 || (coeff(1) == 0.0 && coeff(2) > 0.0)) {
          base = TailModel::power_log(coeff(0), coeff(1), coeff(2));
        } else {
          base = TailModel::unknown();
        }
        break;
      case PieceKind::exp: {
        const double a = coeff(0), k = coeff(1), beta = coeff(2), m = coeff(3);
        if (a == 0.0) {
          base = TailModel::bounded(0.0);
        } else if (k == 0.0) {
          base = TailModel::bounded(a);
        } else if (k > 0.0 && beta > 0.0) {
          base = TailModel::exponential(a, k, beta, m);
        } else if (beta == 0.0 && m == 1.0) {
          base = TailModel::power_log(a, k, 0.0);
        } else {
          base = TailModel::unknown();
        }
        break;
      }
      case PieceKind::tabulated: base = TailModel::unknown(); break;
      case PieceKind::custom: base = custom->tail; break;
    }
    return base.plus_affine(add0, add1);
  }

  /// Piece restricted to [lo, hi) with the same formula.
  Piece clipped(double lo, double hi) const {
    Piece p = *this;
    p.from = std::max(from, lo);
    p.to = std::min(to, hi);
    return p;
  }
};

/// Nondecreasing (unless declared otherwise) function [0, inf] -> [0, inf].
///
/// The pieces are formulas in a variable s = t^r, where r is the argument
/// exponent (1 unless the function came out of power_transform). They tile
/// [0, inf) in s. For finite domain_end T0 the value is +inf on (T0, inf]
/// and at T0 itself unless overridden.
class GrowthFunction {
 public:
  GrowthFunction() : pieces_{Piece{0.0, kInf, PieceKind::constant, {0.0}}} {}

  explicit GrowthFunction(std::vector<Piece> pieces, std::string label = {})
      : pieces_(std::move(pieces)), label_(std::move(label)) {}

  static GrowthFunction single(Piece p, std::string label) {
    p.from = 0.0;
    p.to = kInf;
    return GrowthFunction({std::move(p)}, std::move(label));
  }
  static GrowthFunction constant(double c) {
    return single({0.0, kInf, PieceKind::constant, {c}}, "const");
  }
  static GrowthFunction linear(double c0, double c1) {
    return single({0.0, kInf, PieceKind::linear, {c0, c1}}, "linear");
  }
  static GrowthFunction power(double a, double p) {
    return single({0.0, kInf, PieceKind::power, {a, p}}, "power");
  }
  static GrowthFunction logpow(double a, double p, double q, double c = kE) {
    return single({0.0, kInf, PieceKind::logpow, {a, p, q, c}}, "logpow");
  }
  /// a * exp(k t^beta log^m(c + t)).
  static GrowthFunction exponential(double a, double k, double beta, double m = 0.0, double c = kE) {
    return single({0.0, kInf, PieceKind::exp, {a, k, beta, m, c}}, "exp");
  }
  /// Nodes as interleaved (x0, y0, x1, y1, ...), interpolated linearly.
  static GrowthFunction tabulated(std::vector<double> nodes) {
    return single({0.0, kInf, PieceKind::tabulated, std::move(nodes)}, "tabulated");
  }
  static GrowthFunction custom(std::function<double(double)> value, std::function<double(double)> slope,
                               TailModel tail, std::string label) {
    Piece p{0.0, kInf, PieceKind::custom, {}};
    p.custom = std::make_shared<CustomPiece>(CustomPiece{std::move(value), std::move(slope), tail});
    return single(std::move(p), std::move(label));
  }

  GrowthFunction with_label(std::string label) const {
    GrowthFunction g = *this;
    g.label_ = std::move(label);
    return g;
  }
  GrowthFunction with_domain_end(double T0) const {
    GrowthFunction g = *this;
    g.T0_ = T0;
    return g;
  }
  GrowthFunction with_value_at_zero(std::optional<double> v) const {
    GrowthFunction g = *this;
    g.at_zero_ = v;
    return g;
  }
  GrowthFunction with_value_at_domain_end(std::optional<double> v) const {
    GrowthFunction g = *this;
    g.at_T0_ = v;
    return g;
  }
  GrowthFunction with_value_at_infinity(std::optional<double> v) const {
    GrowthFunction g = *this;
    g.at_inf_ = v;
    return g;
  }
  GrowthFunction with_monotone(bool monotone) const {
    GrowthFunction g = *this;
    g.monotone_ = monotone;
    return g;
  }
  GrowthFunction with_arg_exponent(double r) const {
    GrowthFunction g = *this;
    g.r_ = r;
    return g;
  }
  GrowthFunction with_pieces(std::vector<Piece> pieces) const {
    GrowthFunction g = *this;
    g.pieces_ = std::move(pieces);
    return g;
  }

  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  const std::string& label() const noexcept { return label_; }
  double domain_end() const noexcept { return T0_; }
  double arg_exponent() const noexcept { return r_; }
  bool monotone() const noexcept { return monotone_; }
  const std::optional<double>& value_at_zero() const noexcept { return at_zero_; }
  const std::optional<double>& value_at_domain_end() const noexcept { return at_T0_; }
  const std::optional<double>& value_at_infinity() const noexcept { return at_inf_; }

  double to_inner(double t) const { return r_ == 1.0 ? t : std::pow(t, r_); }
  double to_outer(double s) const { return r_ == 1.0 ? s : std::pow(s, 1.0 / r_); }

  std::size_t piece_index(double s) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), s,
                               [](double v, const Piece& p) { return v < p.from; });
    if (it == pieces_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(pieces_.begin(), it) - 1);
  }

  /// g(t) with the extended-real conventions.
  double operator()(double t) const {
    if (std::isnan(t) || t < 0.0) throw Error(ErrorCode::InvalidInput, "growth argument must lie in [0, inf]");
    if (t == kInf) return at_inf_ ? *at_inf_ : limit_at_infinity();
    if (t == 0.0 && at_zero_) return *at_zero_;
    if (t >= T0_) {
      if (t == T0_ && at_T0_) return *at_T0_;
      return kInf;
    }
    const double s = to_inner(t);
    return pieces_[piece_index(s)].value(s);
  }

  /// Right derivative in t as the right limit of the derivative (no
  /// convexity check). +inf on [T0, inf].
  double slope(double t) const {
    if (t >= T0_) return kInf;
    const double s = to_inner(t);
    const double ds = pieces_[piece_index(s)].slope(s);
    if (r_ == 1.0) return ds;
    if (ds == 0.0) return 0.0;
    return ds * r_ * detail::pow0(t, r_ - 1.0);
  }

  /// lim_{u -> t-} g(u) for t > 0; g(0) for t = 0.
  double left_limit(double t) const {
    if (t <= 0.0) return (*this)(0.0);
    if (t == kInf) return limit_at_infinity();
    if (t > T0_) return kInf;
    const double s = to_inner(t);
    std::size_t i = piece_index(s);
    if (i > 0 && pieces_[i].from == s) --i;
    return pieces_[i].value(s);
  }

  /// lim_{t -> inf} g(t), ignoring the override at infinity.
  double limit_at_infinity() const {
    if (T0_ < kInf) return kInf;
    const Piece& last = pieces_.back();
    const TailModel tm = last.tail();
    switch (tm.kind) {
      case TailModel::Kind::bounded: {
        if (last.kind == PieceKind::custom) return tm.limit;
        return tm.limit;
      }
      case TailModel::Kind::power_log:
      case TailModel::Kind::exponential: return tm.unbounded() ? kInf : tm.coef;
      case TailModel::Kind::unknown: break;
    }
    if (last.kind == PieceKind::tabulated) {
      const double sl = last.slope(last.coeffs[last.coeffs.size() - 2]);
      if (sl > 0.0) return kInf;
      return last.value(last.coeffs[last.coeffs.size() - 2]);
    }
    return last.value(1e300);
  }

  /// Tail model in t.
  TailModel tail_model() const {
    const TailModel tm = pieces_.back().tail();
    return r_ == 1.0 ? tm : tm.substitute_power(r_);
  }

  /// Sorted points in (0, T0] of t where the formula may change, tabulated
  /// nodes included.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      const double t = to_outer(pieces_[i].from);
      if (t > 0.0 && t < T0_) out.push_back(t);
    }
    for (const Piece& p : pieces_) {
      if (p.kind != PieceKind::tabulated) continue;
      for (std::size_t k = 0; k + 1 < p.coeffs.size(); k += 2) {
        const double t = to_outer(p.coeffs[k]);
        if (t > 0.0 && t < T0_ && p.coeffs[k] > p.from && p.coeffs[k] < p.to) out.push_back(t);
      }
    }
    if (T0_ < kInf) out.push_back(T0_);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Throws InvalidInput describing the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& where, const std::string& what) {
      throw Error(ErrorCode::InvalidInput, where + ": " + what);
    };
    if (pieces_.empty()) fail("pieces", "at least one piece is required");
    if (pieces_.front().from != 0.0) fail("pieces[0].from", "pieces must start at 0");
    if (pieces_.back().to != kInf) fail("pieces[" + std::to_string(pieces_.size() - 1) + "].to", "last piece must end at inf");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const Piece& p = pieces_[i];
      const std::string where = "pieces[" + std::to_string(i) + "]";
      if (!(p.to > p.from)) fail(where, "empty or reversed interval");
      if (i + 1 < pieces_.size() && pieces_[i + 1].from != p.to) {
        fail(where + ".to", "gap or overlap with the next piece");
      }
      std::size_t need = 0;
      switch (p.kind) {
        case PieceKind::constant: need = 1; break;
        case PieceKind::linear: need = 2; break;
        case PieceKind::power: need = 2; break;
        case PieceKind::logpow: need = 3; break;
        case PieceKind::exp: need = 3; break;
        case PieceKind::tabulated: need = 4; break;
        case PieceKind::custom: need = 0; break;
      }
      if (p.coeffs.size() < need) fail(where + ".coeffs", "expected at least " + std::to_string(need) + " coefficients");
      for (double c : p.coeffs) {
        if (!std::isfinite(c)) fail(where + ".coeffs", "coefficients must be finite");
      }
      if (p.kind == PieceKind::tabulated) {
        if (p.coeffs.size() % 2 != 0) fail(where + ".coeffs", "tabulated nodes must be (x, y) pairs");
        for (std::size_t k = 2; k < p.coeffs.size(); k += 2) {
          if (!(p.coeffs[k] > p.coeffs[k - 2])) fail(where + ".coeffs", "tabulated x must be strictly increasing");
        }
      }
      if (p.kind == PieceKind::custom && (!p.custom || !p.custom->value || !p.custom->slope)) {
        fail(where, "custom piece without closures");
      }
    }
    if (!(T0_ > 0.0)) fail("T0", "domain end must be positive");
    if (!(r_ > 0.0) || !std::isfinite(r_)) fail("arg_exponent", "must be positive and finite");

    const std::vector<double> grid = sample_grid();
    double prev = -kInf;
    double prev_t = 0.0;
    for (double t : grid) {
      const double v = (*this)(t);
      if (std::isnan(v)) fail("value", "NaN at t = " + format(t));
      if (v < 0.0) fail("value", "negative value " + format(v) + " at t = " + format(t));
      if (monotone_ && v < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
        fail("monotone", "value decreases between t = " + format(prev_t) + " and t = " + format(t));
      }
      if (monotone_ && t > 0.0 && t < T0_) {
        const double left = left_limit(t);
        if (left > v + 1e-12 * std::max(1.0, std::abs(v))) {
          fail("monotone", "downward jump at t = " + format(t));
        }
      }
      prev = v;
      prev_t = t;
    }
  }

  /// Geometric sample grid in t over [0, T0] plus all breakpoints and their
  /// neighbours.
  std::vector<double> sample_grid(int per_decade = 64, double lo = 1e-4, double hi = 1e8) const {
    std::vector<double> out{0.0};
    const double top = T0_ < kInf ? T0_ : hi;
    const double bottom = std::min(lo, top * 1e-6);
    const int count = static_cast<int>(std::ceil(std::log10(top / bottom) * per_decade));
    for (int i = 0; i <= count; ++i) {
      const double t = bottom * std::pow(10.0, static_cast<double>(i) / per_decade);
      if (t < top) out.push_back(t);
    }
    for (double b : breakpoints()) {
      out.push_back(b);
      out.push_back(b * (1.0 - 1e-9));
      if (b < T0_) out.push_back(b * (1.0 + 1e-9));
    }
    if (T0_ < kInf) out.push_back(T0_);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    while (!out.empty() && out.back() > top) out.pop_back();
    return out;
  }

  static std::string format(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

 private:
  std::vector<Piece> pieces_;
  std::string label_;
  double T0_ = kInf;
  double r_ = 1.0;
  bool monotone_ = true;
  std::optional<double> at_zero_;
  std::optional<double> at_T0_;
  std::optional<double> at_inf_;
};

inline double evaluate(const GrowthFunction& g, double t) { return g(t); }

/// Right derivative with a local convexity check on difference quotients.
inline double right_derivative(const GrowthFunction& g, double t) {
  if (t >= g.domain_end()) return kInf;
  const double d = g.slope(t);
  const double h = 1e-4 * std::max(1.0, t);
  const double T0 = g.domain_end();
  if (t + h < T0) {
    const double g0 = g(t);
    const double q1 = (g(t + h) - g0) / h;
    const double q2 = (g(t + 0.5 * h) - g0) / (0.5 * h);
    const double tol = 1e-7 * std::max({1.0, std::abs(q1), std::abs(d)});
    bool bad = q2 > q1 + tol || (std::isfinite(d) && d > q2 + tol);
    if (t > 0.0) {
      const double hl = std::min(h, 0.5 * t);
      const double ql = (g0 - g(t - hl)) / hl;
      bad = bad || ql > q2 + tol;
    }
    if (bad) {
      throw Error(ErrorCode::NotConvex, "difference quotients decrease near t = " + GrowthFunction::format(t));
    }
  }
  return d;
}

struct StrictConvexity {
  bool strictly_convex = false;
  bool convex = false;
  bool inconclusive = false;
  double worst_gap = 0.0;  // max of g(mid) - (g(a) + g(b)) / 2 over tested pairs
  double witness_a = 0.0;
  double witness_b = 0.0;
  std::vector<double> tail_t;
  std::vector<double> tail_slope;  // (g(t) - g(0)) / t
  std::string note;
};

/// Midpoint-convexity test on a geometric grid (512 points per decade over
/// 8 decades) plus certification that g(t)/t is unbounded.
inline StrictConvexity is_strictly_convex(const GrowthFunction& g) {
  StrictConvexity ev;
  const double T0 = g.domain_end();
  const double hi = T0 < kInf ? T0 * (1.0 - 1e-9) : 1e5;
  const double lo = hi * 1e-8;
  std::vector<double> grid;
  grid.reserve(4200);
  for (int i = 0; i <= 4096; ++i) grid.push_back(lo * std::pow(10.0, i / 512.0));
  for (double b : g.breakpoints()) {
    if (b > lo && b < hi) grid.push_back(b);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = g(grid[i]);
  const double g0 = g(0.0);

  ev.convex = true;
  auto test = [&](double a, double ga, double b, double gb) {
    if (!std::isfinite(ga) || !std::isfinite(gb)) return;
    const double mid = g(0.5 * (a + b));
    const double gap = mid - 0.5 * (ga + gb);
    const double tol = 1e-9 * std::max({1.0, std::abs(ga), std::abs(gb)});
    if (gap > ev.worst_gap) {
      ev.worst_gap = gap;
      if (gap > tol) {
        ev.witness_a = a;
        ev.witness_b = b;
      }
    }
    if (gap > tol) ev.convex = false;
  };
  for (std::size_t stride : {1u, 8u, 64u}) {
    for (std::size_t i = 0; i + stride < grid.size(); ++i) test(grid[i], vals[i], grid[i + stride], vals[i + stride]);
  }
  for (std::size_t i = 0; i < grid.size(); i += 8) test(0.0, g0, grid[i], vals[i]);

  const std::size_t tail_from = grid.size() - std::min<std::size_t>(grid.size(), 512);
  bool nondecreasing = true;
  for (std::size_t i = tail_from; i < grid.size(); i += 8) {
    ev.tail_t.push_back(grid[i]);
    ev.tail_slope.push_back((vals[i] - g0) / grid[i]);
  }
  for (std::size_t i = 1; i < ev.tail_slope.size(); ++i) {
    if (ev.tail_slope[i] < ev.tail_slope[i - 1] * (1.0 - 1e-12)) nondecreasing = false;
  }

  bool unbounded = false;
  if (T0 < kInf) {
    unbounded = true;
    ev.note = "finite domain end: g(t)/t is infinite beyond T0";
  } else {
    const TailModel tm = g.tail_model();
    switch (tm.kind) {
      case TailModel::Kind::bounded:
        ev.note = "bounded tail";
        break;
      case TailModel::Kind::power_log:
        unbounded = tm.coef > 0.0 && (tm.p > 1.0 || (tm.p == 1.0 && tm.q > 0.0));
        ev.note = "power-log tail certified from the symbolic form";
        break;
      case TailModel::Kind::exponential:
        unbounded = tm.unbounded();
        ev.note = "exponential tail certified from the symbolic form";
        break;
      case TailModel::Kind::unknown: {
        const double first = ev.tail_slope.front();
        const double last = ev.tail_slope.back();
        if (!nondecreasing) {
          ev.note = "sampled g(t)/t is not monotone over the tail";
        } else if (!std::isfinite(last) || last > first * (1.0 + 1e-3)) {
          unbounded = true;
          ev.note = "sampled g(t)/t grows over the tail (sample-grid evidence only)";
        } else {
          ev.inconclusive = true;
          ev.note = "tail sample too short to certify growth of g(t)/t";
        }
        break;
      }
    }
  }
  ev.strictly_convex = ev.convex && unbounded && nondecreasing && !ev.inconclusive;
  return ev;
}

namespace detail {

enum class TailIntegrand { calderon, derivative };

/// Convergence of the tail of int (t/g)^alpha or int g'^-alpha from the
/// symbolic tail model: returns (convergent, borderline-log).
inline std::pair<bool, bool> certify_tail(const TailModel& tm, double alpha) {
  switch (tm.kind) {
    case TailModel::Kind::bounded: return {false, false};
    case TailModel::Kind::power_log: {
      if (tm.coef <= 0.0) return {false, false};
      const double s = alpha * (tm.p - 1.0);
      if (s > 1.0) return {true, false};
      if (s == 1.0 && alpha * tm.q > 1.0) return {true, true};
      return {false, false};
    }
    case TailModel::Kind::exponential: return {tm.unbounded(), false};
    case TailModel::Kind::unknown: break;
  }
  throw Error(ErrorCode::Inconclusive, "tail behaviour of a tabulated or opaque piece cannot be certified");
}

template <typename F>
double integrate_over(const GrowthFunction& g, F&& f, double a, double b) {
  std::vector<double> cuts{a};
  for (double t : g.breakpoints()) {
    if (t > a && t < b) cuts.push_back(t);
  }
  cuts.push_back(b);
  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) sum += integrate(f, cuts[i], cuts[i + 1]).value;
  return sum.value();
}

inline double tail_integral(const GrowthFunction& g, double alpha, double t_star, TailIntegrand which) {
  const double T0 = g.domain_end();
  auto f = [&](double t) {
    if (which == TailIntegrand::calderon) {
      const double v = g(t);
      return v == kInf ? 0.0 : std::pow(t / v, alpha);
    }
    const double d = g.slope(t);
    if (d == kInf) return 0.0;
    return d == 0.0 ? kInf : std::pow(d, -alpha);
  };
  if (t_star >= T0) return 0.0;
  if (T0 < kInf) return integrate_over(g, f, t_star, T0);

  const TailModel tm = g.tail_model();
  const auto [convergent, borderline] = certify_tail(tm, alpha);
  if (!convergent) return kInf;
  if (which == TailIntegrand::derivative && g.slope(t_star) == 0.0) {
    // g' = 0 on a neighbourhood of t_star unless t_star is an isolated zero.
    if (g.slope(t_star * (1.0 + 1e-9) + 1e-300) == 0.0) return kInf;
  }

  const std::vector<double> bps = g.breakpoints();
  const double B = std::max(t_star, bps.empty() ? t_star : bps.back());
  const double head = B > t_star ? integrate_over(g, f, t_star, B) : 0.0;

  const Piece& last = g.pieces().back();
  const bool pure_power = last.kind == PieceKind::power && last.add0 == 0.0 && last.add1 == 0.0 && B > 0.0;
  if (pure_power) {
    const double c = last.coeff(0);
    const double P = last.coeff(1) * g.arg_exponent();
    const double s = alpha * (P - 1.0);
    const double scale = which == TailIntegrand::calderon ? std::pow(c, -alpha) : std::pow(c * P, -alpha);
    return head + scale * std::pow(B, 1.0 - s) / (s - 1.0);
  }
  const TailDecay decay = borderline ? TailDecay::log_borderline
                          : tm.kind == TailModel::Kind::exponential ? TailDecay::exponential
                                                                    : TailDecay::power;
  const double start = std::max(B, 1e-300);
  return head + integrate_to_infinity(f, start, decay).value;
}

}  // namespace detail

/// int_{t_star}^inf (t / g(t))^alpha dt; +inf when the tail is certified
/// divergent. Throws Inconclusive for tails without a symbolic model.
inline double calderon_integral(const GrowthFunction& g, double alpha, double t_star) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::PreconditionFailed, "alpha must be positive");
  if (!(t_star >= 0.0)) throw Error(ErrorCode::PreconditionFailed, "t_star must be nonnegative");
  if (!(g(t_star) > 0.0)) throw Error(ErrorCode::PreconditionFailed, "g(t_star) must be positive");
  return detail::tail_integral(g, alpha, t_star, detail::TailIntegrand::calderon);
}

/// int_{t_star}^inf dt / [g'_+(t)]^alpha, the derivative form of the
/// Calderon condition.
inline double calderon_derivative_integral(const GrowthFunction& g, double alpha, double t_star) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::PreconditionFailed, "alpha must be positive");
  if (!(t_star >= 0.0)) throw Error(ErrorCode::PreconditionFailed, "t_star must be nonnegative");
  return detail::tail_integral(g, alpha, t_star, detail::TailIntegrand::derivative);
}

/// inf{t : g(t) >= tau}, inf of the empty set being +inf.
inline double generalized_inverse(const GrowthFunction& g, double tau) {
  if (std::isnan(tau)) throw Error(ErrorCode::InvalidInput, "tau is NaN");
  const double T0 = g.domain_end();
  if (tau <= g(0.0)) return 0.0;
  if (tau == kInf) return T0;
  const auto& pieces = g.pieces();
  if (pieces.front().value(0.0) >= tau) return 0.0;

  std::vector<double> cuts{0.0};
  for (double b : g.breakpoints()) cuts.push_back(b);
  if (T0 == kInf) cuts.push_back(kInf);

  auto reached = [&](double t) { return g(t) >= tau; };
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double u = cuts[k];
    const double v = cuts[k + 1];
    if (u > 0.0 && g(u) >= tau) return u;
    if (v == kInf) {
      double hi = std::max(1.0, 2.0 * u);
      while (!reached(hi)) {
        if (hi > 1e300) return kInf;
        hi *= 2.0;
      }
      return bisect_first_true(reached, u, hi);
    }
    if (g.left_limit(v) >= tau) return bisect_first_true(reached, u, v);
  }
  return T0;
}

struct DecompositionResult {
  GrowthFunction psi;
  GrowthFunction phi_tilde;
  double lambda = 0.0;
  double T_star = 0.0;
  double S_star = 0.0;
  double S0 = kInf;
  double t_star = 0.0;
  double I = 0.0;  // int_{t_star}^inf dt / [phi'_+]^alpha
};

namespace detail {

struct DecompositionState {
  GrowthFunction phi;
  double lambda = 0.0;
  double T_star = 0.0;
  double S_star = 0.0;
  double phi0 = 0.0;
  double T0 = kInf;
  std::vector<double> knots;  // t values, knots[0] = T_star
  std::vector<double> cum;    // phi_tilde(knots[k])

  double h(double t) const {
    const double d = phi.slope(t);
    return t < T_star ? d : std::pow(d, lambda);
  }

  double phi_tilde(double t) const {
    if (t >= T0) return kInf;
    if (t <= T_star) return phi(t) - phi0;
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(std::distance(knots.begin(), it) - 1);
    if (knots[k] == t) return cum[k];
    return cum[k] + integrate([this](double u) { return h(u); }, knots[k], t).value;
  }

  double phi_tilde_inverse(double s) const {
    if (s <= 0.0) return 0.0;
    if (s <= S_star) {
      return bisect_first_true([&](double t) { return phi(t) - phi0 >= s; }, 0.0, T_star);
    }
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    if (it == cum.begin()) return T_star;
    std::size_t k = static_cast<std::size_t>(std::distance(cum.begin(), it) - 1);
    double lo = knots[k];
    double hi = k + 1 < knots.size() ? knots[k + 1] : kInf;
    if (hi == kInf) {
      hi = std::max(2.0 * lo, 1.0);
      while (phi_tilde(hi) < s) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return kInf;
      }
    }
    double t = 0.5 * (lo + hi);
    for (int it2 = 0; it2 < 200; ++it2) {
      const double f = phi_tilde(t) - s;
      if (f == 0.0) return t;
      if (f > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      const double d = h(t);
      double next = (d > 0.0 && std::isfinite(d)) ? t - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-15 * std::abs(t) || hi - lo <= 1e-15 * hi) return next;
      t = next;
    }
    return t;
  }
};

}  // namespace detail

/// phi = psi o phi_tilde with lambda = alpha / alpha_tilde.
/// t_star <= 0 picks max(T_star, 1).
inline DecompositionResult decompose(const GrowthFunction& g, double alpha, double alpha_tilde, double t_star = 0.0) {
  if (!(alpha > 0.0) || !(alpha_tilde > alpha)) {
    throw Error(ErrorCode::PreconditionFailed, "require 0 < alpha < alpha_tilde");
  }
  const double phi0 = g(0.0);
  const double T0 = g.domain_end();
  auto state = std::make_shared<detail::DecompositionState>();
  state->phi = g;
  state->lambda = alpha / alpha_tilde;
  state->phi0 = phi0;
  state->T0 = T0;

  double hi = 1.0;
  while (g.slope(hi) < 1.0) {
    hi *= 2.0;
    if (hi > 1e300 || hi >= T0) break;
  }
  if (g.slope(std::min(hi, T0)) < 1.0) {
    throw Error(ErrorCode::PreconditionFailed, "right derivative never reaches 1: g is constant or too flat");
  }
  hi = std::min(hi, T0);
  const double T_star = bisect_first_true([&](double t) { return g.slope(t) >= 1.0; }, 0.0, hi);
  state->T_star = T_star;
  state->S_star = g(T_star) - phi0;

  if (t_star <= 0.0) t_star = std::max(T_star, 1.0);
  const double cal = calderon_integral(g, alpha, std::max(t_star, 1e-12));
  if (!std::isfinite(cal)) {
    throw Error(ErrorCode::PreconditionFailed, "Calderon integral diverges at alpha");
  }

  std::vector<double> knots{T_star};
  const double start = T_star > 0.0 ? T_star : 1e-6;
  for (double t = start * 2.0; t < std::min(T0, 1e18); t *= 2.0) knots.push_back(t);
  for (double b : g.breakpoints()) {
    if (b > T_star && b < std::min(T0, 1e18)) knots.push_back(b);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<double> cum(knots.size());
  cum[0] = state->S_star;
  {
    CompensatedSum acc;
    acc += state->S_star;
    for (std::size_t k = 1; k < knots.size(); ++k) {
      acc += integrate([&](double u) { return state->h(u); }, knots[k - 1], knots[k]).value;
      cum[k] = acc.value();
    }
  }
  state->knots = std::move(knots);
  state->cum = std::move(cum);

  const double S0 = T0 < kInf ? state->phi_tilde(T0 * (1.0 - 1e-15)) : kInf;
  const double lambda = state->lambda;

  TailModel tilde_tail = TailModel::unknown();
  TailModel psi_tail = TailModel::unknown();
  const TailModel tm = g.tail_model();
  if (T0 == kInf && tm.kind == TailModel::Kind::power_log && tm.p > 1.0) {
    const double P = lambda * (tm.p - 1.0) + 1.0;
    const double Q = lambda * tm.q;
    const double C = std::pow(tm.coef * tm.p, lambda) / P;
    tilde_tail = TailModel::power_log(C, P, Q);
    psi_tail = TailModel::power_log(tm.coef * std::pow(C, -tm.p / P) * std::pow(P, -tm.q), tm.p / P, tm.q - tm.p * Q / P);
  } else if (T0 == kInf && tm.kind == TailModel::Kind::exponential) {
    tilde_tail = TailModel::exponential(1.0, lambda * tm.k, tm.beta, tm.m);
    psi_tail = TailModel::power_log(1.0, 1.0 / lambda, 0.0);
  }

  auto tilde = GrowthFunction::custom([state](double t) { return state->phi_tilde(t); },
                                      [state](double t) { return t >= state->T0 ? kInf : state->h(t); }, tilde_tail,
                                      "phi_tilde(" + g.label() + ")")
                   .with_domain_end(T0);
  if (T0 < kInf) tilde = tilde.with_value_at_domain_end(kInf);

  auto psi_value = [state, S0](double s) {
    if (s >= S0) return kInf;
    if (s < state->S_star) return state->phi0 + s;
    return state->phi(state->phi_tilde_inverse(s));
  };
  auto psi_slope = [state, S0](double s) {
    if (s >= S0) return kInf;
    if (s < state->S_star) return 1.0;
    return std::pow(state->phi.slope(state->phi_tilde_inverse(s)), 1.0 - state->lambda);
  };
  auto psi = GrowthFunction::custom(psi_value, psi_slope, psi_tail, "psi(" + g.label() + ")").with_domain_end(S0);

  DecompositionResult out;
  out.psi = std::move(psi);
  out.phi_tilde = std::move(tilde);
  out.lambda = lambda;
  out.T_star = T_star;
  out.S_star = state->S_star;
  out.S0 = S0;
  out.t_star = t_star;
  out.I = calderon_derivative_integral(g, alpha, t_star);
  return out;
}

/// Adds eps 2^-i times a unit ramp on the i-th constancy interval, making the
/// function strictly increasing while staying within eps of g.
inline GrowthFunction regularize(const GrowthFunction& g, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::PreconditionFailed, "epsilon must be positive");
  const double S0 = g.domain_end() < kInf ? g.to_inner(g.domain_end()) : kInf;

  struct Interval {
    double a, b;
  };
  std::vector<Interval> flats;
  auto push_flat = [&](double a, double b, double va) {
    b = std::min(b, S0);
    if (!(b > a)) return;
    if (!flats.empty() && flats.back().b == a) {
      // Merge only when the value does not jump at the seam.
      const double prev = g.pieces()[g.piece_index(std::nextafter(a, 0.0))].value(a);
      if (std::abs(prev - va) <= 1e-15 * std::max(1.0, std::abs(va))) {
        flats.back().b = b;
        return;
      }
    }
    flats.push_back({a, b});
  };
  for (const Piece& p : g.pieces()) {
    if (p.from >= S0) break;
    if (p.flat()) {
      push_flat(p.from, p.to, p.value(p.from));
    } else if (p.kind == PieceKind::tabulated && p.add1 == 0.0) {
      const auto& c = p.coeffs;
      const std::size_t count = c.size() / 2;
      for (std::size_t k = 0; k + 1 < count; ++k) {
        if (c[2 * k + 1] != c[2 * k + 3]) continue;
        double a = k == 0 ? -kInf : c[2 * k];
        double b = k + 2 == count ? kInf : c[2 * k + 2];
        a = std::max(a, p.from);
        b = std::min(b, p.to);
        if (b > a) push_flat(a, b, p.value(a));
      }
    }
  }
  if (flats.empty()) return g;

  std::vector<Piece> pieces = g.pieces();
  auto split_at = [&](double x) {
    if (x <= 0.0 || x == kInf) return;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].from < x && x < pieces[i].to) {
        Piece right = pieces[i].clipped(x, pieces[i].to);
        pieces[i].to = x;
        pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(i + 1), right);
        return;
      }
    }
  };
  for (const Interval& f : flats) {
    split_at(f.a);
    split_at(f.b);
  }
  for (std::size_t i = 0; i < flats.size(); ++i) {
    const double height = epsilon * std::ldexp(1.0, -static_cast<int>(i + 1));
    const double a = flats[i].a;
    const double b = flats[i].b;
    if (b == kInf) {
      // Unbounded constancy interval: saturating ramp with the same bound.
      const double c = g.pieces()[g.piece_index(a)].value(a);
      std::vector<Piece> kept;
      for (const Piece& p : pieces) {
        if (p.from < a) kept.push_back(p);
      }
      Piece soft{a, kInf, PieceKind::custom, {}};
      soft.custom = std::make_shared<CustomPiece>(CustomPiece{
          [c, a, height](double s) { return c + height * (s - a) / (1.0 + s - a); },
          [a, height](double s) { return height / ((1.0 + s - a) * (1.0 + s - a)); },
          TailModel::bounded(c + height)});
      kept.push_back(soft);
      pieces = std::move(kept);
      continue;
    }
    for (Piece& p : pieces) {
      if (p.from >= a && p.to <= b) {
        p.add1 += height / (b - a);
        p.add0 -= height * a / (b - a);
      } else if (p.from >= b) {
        if (p.kind == PieceKind::custom) {
          auto inner = p.custom;
          p.custom = std::make_shared<CustomPiece>(CustomPiece{
              [inner, height](double s) { return inner->value(s) + height; }, inner->slope,
              inner->tail.plus_affine(height, 0.0)});
        } else {
          p.add0 += height;
        }
      }
    }
  }
  return g.with_pieces(std::move(pieces)).with_label(g.label() + "_reg");
}

/// phi_*(0) = 0, phi_* = g(t_star) on (0, t_star), phi_* = g on [t_star, inf].
inline GrowthFunction truncate_below(const GrowthFunction& g, double t_star) {
  if (!(t_star > 0.0)) throw Error(ErrorCode::PreconditionFailed, "t_star must be positive");
  const double v = g(t_star);
  if (!(v > 0.0)) throw Error(ErrorCode::PreconditionFailed, "g(t_star) must be positive");
  if (!std::isfinite(v)) throw Error(ErrorCode::PreconditionFailed, "g(t_star) must be finite");
  const double s_star = g.to_inner(t_star);
  std::vector<Piece> pieces{Piece{0.0, s_star, PieceKind::constant, {v}}};
  for (const Piece& p : g.pieces()) {
    if (p.to <= s_star) continue;
    pieces.push_back(p.clipped(s_star, p.to));
  }
  return g.with_pieces(std::move(pieces)).with_value_at_zero(0.0).with_label(g.label() + "_trunc");
}

struct ConvexMinorant {
  GrowthFunction minorant;
  double T_star = 0.0;
  double slope = 0.0;
};

/// 0 on [0, t_star], then the line through (t_star, 0) touching g at T_*,
/// then g itself.
inline ConvexMinorant convex_minorant_detail(const GrowthFunction& g, double t_star) {
  const double T0 = g.domain_end();
  auto F = [&](double T) { return g.slope(T) * (T - t_star) - g(T); };
  double hi = std::max(2.0 * t_star, 1.0);
  // Bracket with a strict margin: rounding makes F vanish at huge T for
  // functions without a tangent point.
  while (!(F(hi) > 1e-9 * std::abs(g(hi)))) {
    hi *= 2.0;
    if (hi > 1e300 || hi >= T0) {
      throw Error(ErrorCode::NoTangent, "no touching point of a tangent through (t_star, 0) on the sample range");
    }
  }
  const double T_star = bisect_first_true([&](double T) { return F(T) >= 0.0; }, t_star, hi);
  const double gT = g(T_star);
  const double m = T_star > t_star ? gT / (T_star - t_star) : 0.0;
  auto src = std::make_shared<GrowthFunction>(g);
  std::vector<Piece> pieces;
  if (t_star > 0.0) pieces.push_back(Piece{0.0, t_star, PieceKind::constant, {0.0}});
  if (T_star > t_star) pieces.push_back(Piece{t_star, T_star, PieceKind::linear, {-m * t_star, m}});
  Piece rest{T_star, kInf, PieceKind::custom, {}};
  rest.custom = std::make_shared<CustomPiece>(
      CustomPiece{[src](double t) { return (*src)(t); }, [src](double t) { return src->slope(t); }, g.tail_model()});
  pieces.push_back(rest);
  GrowthFunction out = GrowthFunction(std::move(pieces), g.label() + "_minorant")
                           .with_domain_end(T0)
                           .with_value_at_domain_end(g.value_at_domain_end())
                           .with_value_at_infinity(g.value_at_infinity());
  return {out, T_star, m};
}

inline GrowthFunction convex_minorant(const GrowthFunction& g, double t_star) {
  return convex_minorant_detail(g, t_star).minorant;
}

enum class PowerDirection {
  to_lower,  // phi(t) = Phi(t^{n-1})
  to_upper,  // Phi(t) = phi(t^{1/(n-1)})
};

inline GrowthFunction power_transform(const GrowthFunction& g, int n, PowerDirection direction) {
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "n must be at least 2");
  const double e = n - 1.0;
  const double factor = direction == PowerDirection::to_lower ? e : 1.0 / e;
  const double T0 = g.domain_end();
  return g.with_arg_exponent(g.arg_exponent() * factor)
      .with_domain_end(T0 < kInf ? std::pow(T0, 1.0 / factor) : kInf)
      .with_label(g.label() + (direction == PowerDirection::to_lower ? "_lower" : "_upper"));
}

}  // namespace distortion_lab
