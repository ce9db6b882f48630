#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distortion_lab/core.hpp"
#include "distortion_lab/field.hpp"
#include "distortion_lab/growth.hpp"
#include "distortion_lab/quadrature.hpp"

namespace distortion_lab {

/// q(r) = c + a r^p log^k(1/r), or an arbitrary closure. The symbolic form
/// carries the certified verdicts; closures only get numeric ones.
struct RadialFunction {
  double c = 0.0;
  double a = 0.0;
  double p = 0.0;
  double k = 0.0;
  std::function<double(double)> closure;
  std::string label;

  static RadialFunction constant(double c) { return {c, 0.0, 0.0, 0.0, {}, "const"}; }
  static RadialFunction symbolic(double c, double a, double p, double k) { return {c, a, p, k, {}, "symbolic"}; }
  /// a log^k(1/r).
  static RadialFunction log_power(double k, double a = 1.0) { return {0.0, a, 0.0, k, {}, "log-power"}; }
  static RadialFunction custom(std::function<double(double)> f, std::string label) {
    return {0.0, 0.0, 0.0, 0.0, std::move(f), std::move(label)};
  }

  bool symbolic_form() const { return !closure; }

  double operator()(double r) const {
    if (closure) return closure(r);
    if (a == 0.0) return c;
    const double lg = k == 0.0 ? 1.0 : std::pow(std::log(1.0 / r), k);
    return c + a * std::pow(r, p) * lg;
  }
};

/// Scalar node values on a box grid (row-major, last axis fastest),
/// interpolated multilinearly.
struct ScalarGrid {
  Box box;
  std::vector<int> res;
  std::vector<double> nodes;

  void validate() const {
    box.validate("scalar grid");
    std::size_t count = 1;
    for (int r : res) {
      if (r < 1) throw Error(ErrorCode::InvalidInput, "scalar grid: resolution must be >= 1");
      count *= static_cast<std::size_t>(r) + 1;
    }
    if (res.size() != box.lo.size() || nodes.size() != count) {
      throw Error(ErrorCode::InvalidInput, "scalar grid: node count does not match the resolution");
    }
  }

  double operator()(const std::vector<double>& x) const {
    const int n = box.dim();
    std::vector<int> base(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double s = (x[k] - box.lo[k]) / box.side(i) * res[k];
      const int b = std::clamp(static_cast<int>(std::floor(s)), 0, res[k] - 1);
      base[k] = b;
      frac[k] = std::clamp(s - b, 0.0, 1.0);
    }
    double out = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
      double w = 1.0;
      std::size_t flat = 0;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const int bit = (corner >> (n - 1 - i)) & 1;
        w *= bit ? frac[k] : 1.0 - frac[k];
        flat = flat * (static_cast<std::size_t>(res[k]) + 1) + static_cast<std::size_t>(base[k] + bit);
      }
      if (w != 0.0) out += w * nodes[flat];
    }
    return out;
  }
};

/// The dominant Q >= 1 of a condition.
struct Dominant {
  enum class Kind { constant, radial, field, custom };
  Kind kind = Kind::constant;
  int n = 3;
  double value = 1.0;
  RadialFunction q;
  std::vector<double> center;
  std::shared_ptr<const ScalarGrid> grid;
  std::function<double(const std::vector<double>&)> fn;
  std::string label;

  static Dominant constant(int n, double c) {
    Dominant d;
    d.kind = Kind::constant;
    d.n = n;
    d.value = c;
    d.label = "const";
    return d;
  }
  /// Q(x) = q(|x - center|).
  static Dominant radial(int n, std::vector<double> center, RadialFunction q) {
    if (static_cast<int>(center.size()) != n) throw Error(ErrorCode::InvalidInput, "dominant: centre has the wrong rank");
    Dominant d;
    d.kind = Kind::radial;
    d.n = n;
    d.q = std::move(q);
    d.center = std::move(center);
    d.label = d.q.label;
    return d;
  }
  static Dominant field(ScalarGrid g, std::string label) {
    g.validate();
    Dominant d;
    d.kind = Kind::field;
    d.n = g.box.dim();
    d.grid = std::make_shared<const ScalarGrid>(std::move(g));
    d.label = std::move(label);
    return d;
  }
  static Dominant custom(int n, std::function<double(const std::vector<double>&)> f, std::string label) {
    Dominant d;
    d.kind = Kind::custom;
    d.n = n;
    d.fn = std::move(f);
    d.label = std::move(label);
    return d;
  }

  double operator()(const std::vector<double>& x) const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::radial: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
        return q(std::sqrt(s));
      }
      case Kind::field: return (*grid)(x);
      case Kind::custom: return fn(x);
    }
    return 0.0;
  }

  /// Radial about x0 with a known profile: sphere averages are q(r).
  bool radial_about(const std::vector<double>& x0) const {
    if (kind == Kind::constant) return true;
    return kind == Kind::radial && center == x0;
  }
  /// Symbolic radial profile about x0, if any.
  std::optional<RadialFunction> profile_about(const std::vector<double>& x0) const {
    if (kind == Kind::constant) return RadialFunction::constant(value);
    if (kind == Kind::radial && center == x0 && q.symbolic_form()) return q;
    return std::nullopt;
  }
};

/// Averaging rule on S^{n-1}: Gauss-Legendre in each polar angle (with the
/// sin^j density folded into the weights) and equispaced azimuths.
struct SphereRule {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;  // sum to 1
};

inline SphereRule sphere_rule(int n, int m = 0) {
  if (n < 2) throw Error(ErrorCode::InvalidInput, "sphere rule needs n >= 2");
  if (m <= 0) m = n <= 4 ? 24 : 16;
  const auto [gx, gw] = gauss_legendre(m);
  const int az = 2 * m;
  // Enumerate (theta_1, ..., theta_{n-2}, phi).
  SphereRule rule;
  const int polar = n - 2;
  std::size_t total = static_cast<std::size_t>(az);
  for (int i = 0; i < polar; ++i) total *= static_cast<std::size_t>(m);
  rule.points.reserve(total);
  rule.weights.reserve(total);
  std::vector<int> idx(static_cast<std::size_t>(polar), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    const int a = static_cast<int>(r % static_cast<std::size_t>(az));
    r /= static_cast<std::size_t>(az);
    for (int i = polar - 1; i >= 0; --i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(m));
      r /= static_cast<std::size_t>(m);
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    double w = 1.0;
    double sprod = 1.0;
    for (int i = 0; i < polar; ++i) {
      const auto g = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      const double theta = 0.5 * kPi * (gx[g] + 1.0);
      x[static_cast<std::size_t>(i)] = sprod * std::cos(theta);
      w *= 0.5 * kPi * gw[g] * std::pow(std::sin(theta), n - 2 - i);
      sprod *= std::sin(theta);
    }
    const double phi = 2.0 * kPi * (a + 0.5) / az;
    x[static_cast<std::size_t>(n - 2)] = sprod * std::cos(phi);
    x[static_cast<std::size_t>(n - 1)] = sprod * std::sin(phi);
    w *= 2.0 * kPi / az;
    rule.points.push_back(std::move(x));
    rule.weights.push_back(w);
  }
  double s = 0.0;
  for (double w : rule.weights) s += w;
  for (double& w : rule.weights) w /= s;
  return rule;
}

enum class ConditionVerdict { holds, fails, inconclusive };

inline const char* to_string(ConditionVerdict v) noexcept {
  switch (v) {
    case ConditionVerdict::holds: return "holds";
    case ConditionVerdict::fails: return "fails";
    case ConditionVerdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct ConditionReport {
  std::string id;
  ConditionVerdict verdict = ConditionVerdict::inconclusive;
  std::vector<std::pair<double, double>> evidence;  // (scale, value)
  std::string method;
  bool certified = false;
  std::string note;
};

/// eps0/2, eps0/4, ... (24 values).
inline std::vector<double> default_schedule(double eps0) { return geometric_schedule(0.5 * eps0, 0.5, 24); }

namespace detail {

inline void check_schedule(const std::vector<double>& eps, std::size_t min_count) {
  if (eps.size() < std::max<std::size_t>(min_count, 4)) {
    throw Error(ErrorCode::InvalidInput, "schedule needs at least " + std::to_string(std::max<std::size_t>(min_count, 4)) + " values");
  }
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0) || (i > 0 && !(eps[i] < eps[i - 1]))) {
      throw Error(ErrorCode::InvalidInput, "schedule must be positive and strictly decreasing");
    }
  }
  if (eps.front() / eps.back() < 1e3) throw Error(ErrorCode::InvalidInput, "schedule must span at least 3 decades");
}

inline double radius(const std::vector<double>& x, const std::vector<double>& x0) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - x0[i]) * (x[i] - x0[i]);
  return std::sqrt(s);
}

/// Q >= 1 on the ball B(x0, R), sampled.
inline void check_floor(const Dominant& Q, const std::vector<double>& x0, double R) {
  auto fail = [&](double v) {
    throw Error(ErrorCode::InvalidInput, "dominant " + Q.label + " drops below 1 (value " + std::to_string(v) + ")");
  };
  if (Q.kind == Dominant::Kind::constant) {
    if (!(Q.value >= 1.0)) fail(Q.value);
    return;
  }
  if (Q.kind == Dominant::Kind::field) {
    for (double v : Q.grid->nodes) {
      if (!(v >= 1.0 - 1e-12)) fail(v);
    }
    return;
  }
  if (Q.radial_about(x0)) {
    for (double r : geometric_schedule(R, 0.5, 40)) {
      const double v = Q.q(r);
      if (!(v >= 1.0 - 1e-12)) fail(v);
    }
    return;
  }
  const SphereRule rule = sphere_rule(Q.n, 6);
  for (double r : geometric_schedule(R, 0.5, 12)) {
    for (const auto& u : rule.points) {
      std::vector<double> x(x0);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += r * u[i];
      const double v = Q(x);
      if (!(v >= 1.0 - 1e-12)) fail(v);
    }
  }
}

/// Integral of f over [lo, hi] in u = log(1/r), i.e. of f(r) r du.
template <typename F>
double log_segment(F&& f, double lo, double hi) {
  const double u_hi = std::log(1.0 / lo), u_lo = std::log(1.0 / hi);
  return integrate(
             [&](double u) {
               const double r = std::exp(-u);
               return f(r) * r;
             },
             u_lo, u_hi, {1e-11, 18})
      .value;
}

/// Cumulative integrals over [eps_k, eps0] for a decreasing schedule.
template <typename F>
std::vector<double> cumulative(F&& f, const std::vector<double>& eps, double eps0) {
  std::vector<double> out(eps.size());
  CompensatedSum acc;
  double upper = eps0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    acc += log_segment(f, eps[i], upper);
    upper = eps[i];
    out[i] = acc.value();
  }
  return out;
}

/// ratio(last) / ratio(first) over the tail half; holds when clearly
/// decreasing to zero, fails when flat or growing.
inline ConditionVerdict ratio_trend(const std::vector<double>& v, std::string& note) {
  const std::size_t from = v.size() / 2;
  const double first = v[from], last = v.back();
  bool decreasing = true;
  for (std::size_t i = from + 1; i < v.size(); ++i) decreasing = decreasing && v[i] <= v[i - 1] * (1.0 + 1e-12);
  const double d = last / first;
  note = "tail ratio end/start = " + std::to_string(d);
  if (!std::isfinite(d) || d > 0.97) return ConditionVerdict::fails;
  if (d < 0.9 && decreasing) return ConditionVerdict::holds;
  return ConditionVerdict::inconclusive;
}

/// Local exponent e of the integrand, read off the tail increments of a
/// cumulative integral against its scale variable s (uniform steps in s, or
/// doubling steps when `doubling`): the integral diverges for e >= -1.
inline ConditionVerdict exponent_trend(const std::vector<double>& s, const std::vector<double>& cum, bool doubling,
                                       std::string& note) {
  const std::size_t n = cum.size();
  const std::size_t a = n / 2;
  const double d1 = cum[a] - cum[a - 1];
  const double d2 = cum[n - 1] - cum[n - 2];
  if (!std::isfinite(cum.back())) {
    note = "partial integral is already infinite";
    return ConditionVerdict::holds;
  }
  if (d2 <= 0.0 || d1 <= 0.0) {
    note = "tail increments vanish";
    return d2 <= 0.0 ? ConditionVerdict::fails : ConditionVerdict::inconclusive;
  }
  const double s1 = 0.5 * (s[a] + s[a - 1]);
  const double s2 = 0.5 * (s[n - 1] + s[n - 2]);
  double e = std::log(d2 / d1) / std::log(s2 / s1);
  if (doubling) e -= 1.0;
  note = "tail integrand exponent ~ " + std::to_string(e);
  if (e >= -0.9) return ConditionVerdict::holds;
  if (e <= -1.1) return ConditionVerdict::fails;
  return ConditionVerdict::inconclusive;
}

}  // namespace detail

/// Mean of Q over the sphere |x - x0| = r.
inline double sphere_average(const Dominant& Q, const std::vector<double>& x0, double r) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidInput, "sphere radius must be positive");
  if (static_cast<int>(x0.size()) != Q.n) throw Error(ErrorCode::InvalidInput, "sphere centre has the wrong rank");
  if (Q.kind == Dominant::Kind::field && !Q.grid->box.contains(Box::cube(x0, 2.0 * r), 1e-12)) {
    throw Error(ErrorCode::SphereOutOfDomain, "sphere leaves the dominant's grid");
  }
  if (Q.radial_about(x0)) return Q.kind == Dominant::Kind::constant ? Q.value : Q.q(r);
  const SphereRule rule = sphere_rule(Q.n);
  CompensatedSum acc;
  std::vector<double> x(x0.size());
  for (std::size_t k = 0; k < rule.points.size(); ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + r * rule.points[k][i];
    acc += rule.weights[k] * Q(x);
  }
  return acc.value();
}

/// (1/|B(x0, eps)|) integral of Q over the ball, as n eps^-n times the
/// integral of sphere averages against r^{n-1}, taken in u = log(eps/r).
inline double ball_average(const Dominant& Q, const std::vector<double>& x0, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidInput, "ball radius must be positive");
  if (Q.kind == Dominant::Kind::constant) return Q.value;
  const int n = Q.n;
  if (Q.kind == Dominant::Kind::radial && Q.radial_about(x0) && Q.q.symbolic_form() && Q.q.a != 0.0 && Q.q.p <= -n) {
    return kInf;
  }
  auto integrand = [&](double u) { return sphere_average(Q, x0, eps * std::exp(-u)) * std::exp(-n * u); };
  double total = 0.0;
  if (Q.radial_about(x0)) {
    for (auto [a, b] : {std::pair{0.0, 1.0}, {1.0, 5.0}, {5.0, 20.0}, {20.0, 80.0}}) {
      total += integrate(integrand, a, b, {1e-11, 18}).value;
    }
  } else {
    const auto [gx, gw] = gauss_legendre(16);
    for (auto [a, b] : {std::pair{0.0, 1.0}, {1.0, 4.0}, {4.0, 12.0}, {12.0, 40.0}}) {
      for (std::size_t i = 0; i < gx.size(); ++i) {
        total += 0.5 * (b - a) * gw[i] * integrand(0.5 * (a + b) + 0.5 * (b - a) * gx[i]);
      }
    }
  }
  return n * total;
}

/// Whether limsup of ball averages at x0 is finite.
inline ConditionReport ball_average_limsup(const Dominant& Q, const std::vector<double>& x0,
                                           const std::vector<double>& eps) {
  detail::check_schedule(eps, 6);
  detail::check_floor(Q, x0, eps.front());
  ConditionReport rep;
  rep.id = "ball_average_limsup";
  std::vector<double> v;
  for (double e : eps) {
    v.push_back(ball_average(Q, x0, e));
    rep.evidence.push_back({e, v.back()});
  }
  if (const auto q = Q.profile_about(x0)) {
    const bool bounded = q->a == 0.0 || q->p > 0.0 || (q->p == 0.0 && q->k <= 0.0);
    rep.verdict = bounded ? ConditionVerdict::holds : ConditionVerdict::fails;
    rep.certified = true;
    rep.method = "closed form: c + a r^p log^k(1/r) is bounded near 0 iff a = 0, p > 0, or p = 0 and k <= 0";
    return rep;
  }
  rep.method = "heuristic: tail-half bound against the median and log-log growth";
  const std::size_t from = v.size() / 2;
  std::vector<double> tail(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
  std::vector<double> sorted = tail;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double mx = sorted.back();
  const double L1 = std::log(std::log(1.0 / eps[from])), L2 = std::log(std::log(1.0 / eps.back()));
  bool increasing = true;
  for (std::size_t i = 1; i < tail.size(); ++i) increasing = increasing && tail[i] >= tail[i - 1];
  const double slope = (std::log(tail.back()) - std::log(tail.front())) / (L2 - L1);
  rep.note = "log-log slope " + std::to_string(slope);
  if (!std::isfinite(mx) || (increasing && slope > 0.1)) {
    rep.verdict = ConditionVerdict::fails;
  } else if (mx <= 2.0 * median) {
    rep.verdict = ConditionVerdict::holds;
  } else {
    rep.verdict = ConditionVerdict::inconclusive;
  }
  return rep;
}

/// Partial integrals I(eps) = integral over [eps, eps0] of dr / (r q^{1/(n-1)}).
/// Certified for the symbolic form; closures get a slope heuristic.
inline ConditionReport divergence_integral(const RadialFunction& q, int n, double eps0,
                                           std::vector<double> eps = {}) {
  if (n < 2) throw Error(ErrorCode::InvalidInput, "n must be >= 2");
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw Error(ErrorCode::InvalidInput, "eps0 must lie in (0, 1)");
  if (eps.empty()) eps = default_schedule(eps0);
  detail::check_schedule(eps, 4);
  detail::check_floor(Dominant::radial(n, std::vector<double>(static_cast<std::size_t>(n), 0.0), q),
                      std::vector<double>(static_cast<std::size_t>(n), 0.0), eps0);
  ConditionReport rep;
  rep.id = "divergence_integral";
  const double e = 1.0 / (n - 1);
  const auto I = detail::cumulative([&](double r) { return 1.0 / (r * std::pow(q(r), e)); }, eps, eps0);
  for (std::size_t i = 0; i < eps.size(); ++i) rep.evidence.push_back({eps[i], I[i]});
  if (q.symbolic_form()) {
    rep.certified = true;
    bool diverges;
    if (q.a == 0.0 || q.p > 0.0) {
      diverges = true;
      rep.method = "closed form: q tends to a constant, integrand ~ 1/r";
    } else if (q.p < 0.0) {
      diverges = false;
      rep.method = "closed form: integrand ~ r^{-1 - p/(n-1)} with p < 0 is integrable";
    } else {
      diverges = q.k / (n - 1) <= 1.0;
      rep.method = "closed form: integrand ~ du / u^{k/(n-1)} in u = log(1/r), divergent iff k/(n-1) <= 1";
    }
    rep.verdict = diverges ? ConditionVerdict::holds : ConditionVerdict::fails;
    return rep;
  }
  std::vector<double> u;
  for (double x : eps) u.push_back(std::log(1.0 / x));
  rep.method = "heuristic: tail increments against log(1/eps)";
  rep.verdict = detail::exponent_trend(u, I, false, rep.note);
  return rep;
}

enum class AnnulusMethod { radial, grid };

namespace detail {

/// Integral over the annulus inner < |x - x0| < outer of Q(x) g(|x - x0|)
/// on a res^n grid over the enclosing cube: 2-point Gauss per axis in
/// interior cells; cells cut by a sphere are bisected `depth` times and
/// their Gauss points tested for membership.
inline double annulus_grid(const Dominant& Q, const std::vector<double>& x0, const std::function<double(double)>& g,
                           double inner, double outer, int res, int depth) {
  const int n = Q.n;
  const double h = 2.0 * outer / res;
  const double gpt = 0.5 / std::sqrt(3.0);
  std::function<double(const std::vector<double>&, double, int)> cell = [&](const std::vector<double>& lo, double side,
                                                                            int d) -> double {
    double near = 0.0, far = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double a = lo[k] - x0[k], b = a + side;
      const double c = std::clamp(0.0, a, b);
      near += c * c;
      far += std::max(a * a, b * b);
    }
    near = std::sqrt(near);
    far = std::sqrt(far);
    if (far <= inner || near >= outer) return 0.0;
    const bool inside = near >= inner && far <= outer;
    if (!inside && d > 0) {
      double s = 0.0;
      std::vector<double> sub(lo);
      for (int corner = 0; corner < (1 << n); ++corner) {
        for (int i = 0; i < n; ++i) sub[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)] + ((corner >> i) & 1) * 0.5 * side;
        s += cell(sub, 0.5 * side, d - 1);
      }
      return s;
    }
    double s = 0.0;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int corner = 0; corner < (1 << n); ++corner) {
      for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)] + side * (0.5 + (((corner >> i) & 1) ? gpt : -gpt));
      }
      const double r = radius(x, x0);
      if (r <= inner || r >= outer) continue;
      s += Q(x) * g(r);
    }
    return s * std::pow(side, n) / (1 << n);
  };
  std::size_t slab_cells = 1;
  for (int i = 1; i < n; ++i) slab_cells *= static_cast<std::size_t>(res);
  std::vector<double> slabs(static_cast<std::size_t>(res), 0.0);
  parallel_for(static_cast<std::size_t>(res), [&](std::size_t a) {
    CompensatedSum acc;
    std::vector<double> lo(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < slab_cells; ++c) {
      std::size_t r = c;
      for (int i = n - 1; i >= 1; --i) {
        lo[static_cast<std::size_t>(i)] = x0[static_cast<std::size_t>(i)] - outer + h * static_cast<double>(r % static_cast<std::size_t>(res));
        r /= static_cast<std::size_t>(res);
      }
      lo[0] = x0[0] - outer + h * static_cast<double>(a);
      acc += cell(lo, h, depth);
    }
    slabs[a] = acc.value();
  });
  CompensatedSum total;
  for (double s : slabs) total += s;
  return total.value();
}

}  // namespace detail

/// Integral over inner < |x - x0| < outer of Q(x) g(|x - x0|): radially
/// (1-D quadrature of sphere averages) or on an n-D grid.
inline double annulus_integral(const Dominant& Q, const std::vector<double>& x0, const std::function<double(double)>& g,
                               double inner, double outer, AnnulusMethod method = AnnulusMethod::radial,
                               int res = 128, int depth = 4) {
  if (!(inner > 0.0 && outer > inner)) throw Error(ErrorCode::InvalidInput, "annulus needs 0 < inner < outer");
  if (method == AnnulusMethod::grid) return detail::annulus_grid(Q, x0, g, inner, outer, res, depth);
  const int n = Q.n;
  const double w = sphere_area(n);
  return w * detail::log_segment([&](double r) { return sphere_average(Q, x0, r) * g(r) * std::pow(r, n - 1); }, inner,
                                 outer);
}

/// R(eps) = integral over eps < |x - x0| < eps0 of Q psi^n against
/// I(eps, eps0)^n with I = integral of psi over [eps, eps0].
inline ConditionReport ring_condition(const Dominant& Q, const std::vector<double>& x0, const RadialFunction& psi,
                                      std::vector<double> eps, double eps0) {
  if (eps.empty()) eps = default_schedule(eps0);
  detail::check_schedule(eps, 4);
  if (!(eps.front() < eps0)) throw Error(ErrorCode::InvalidInput, "schedule must start below eps0");
  detail::check_floor(Q, x0, eps0);
  const int n = Q.n;
  const auto I = detail::cumulative([&](double r) { return psi(r); }, eps, eps0);
  for (double v : I) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::PreconditionFailed, "I(eps, eps0) must be positive and finite");
    }
  }
  const double w = sphere_area(n);
  const auto R = detail::cumulative(
      [&](double r) { return w * sphere_average(Q, x0, r) * std::pow(psi(r), n) * std::pow(r, n - 1); }, eps, eps0);
  ConditionReport rep;
  rep.id = "ring_condition";
  std::vector<double> ratio;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    ratio.push_back(R[i] / std::pow(I[i], n));
    rep.evidence.push_back({eps[i], ratio.back()});
  }
  rep.method = "heuristic: R / I^n trend over the tail half (radial quadrature of sphere averages)";
  rep.verdict = detail::ratio_trend(ratio, rep.note);
  return rep;
}

/// L(eps) = integral over eps < |x - x0| < eps0 of Q / |x - x0|^n against
/// log^n(1/eps).
inline ConditionReport log_order_condition(const Dominant& Q, const std::vector<double>& x0, std::vector<double> eps,
                                           double eps0) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw Error(ErrorCode::InvalidInput, "eps0 must lie in (0, 1)");
  if (eps.empty()) eps = default_schedule(eps0);
  detail::check_schedule(eps, 4);
  detail::check_floor(Q, x0, eps0);
  const int n = Q.n;
  const double w = sphere_area(n);
  const auto L = detail::cumulative([&](double r) { return w * sphere_average(Q, x0, r) / r; }, eps, eps0);
  ConditionReport rep;
  rep.id = "log_order_condition";
  std::vector<double> ratio;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    ratio.push_back(L[i] / std::pow(std::log(1.0 / eps[i]), n));
    rep.evidence.push_back({eps[i], ratio.back()});
  }
  if (const auto q = Q.profile_about(x0)) {
    rep.certified = true;
    const bool zero = q->a == 0.0 || q->p > 0.0 || (q->p == 0.0 && q->k + 1.0 < n);
    rep.verdict = zero ? ConditionVerdict::holds : ConditionVerdict::fails;
    rep.method = "closed form: L ~ log^{k+1}(1/eps) for p = 0, a power for p < 0, log(1/eps) otherwise";
    return rep;
  }
  rep.method = "heuristic: L / log^n trend over the tail half";
  rep.verdict = detail::ratio_trend(ratio, rep.note);
  return rep;
}

/// Divergence of the integral over [delta, inf) of dtau / (tau Phi^{-1}(tau)^{1/alpha})
/// and of its log form, the integral of log Phi(t) dt / t^{1 + 1/alpha}.
struct PhiDivergenceReport {
  ConditionReport direct;
  ConditionReport log_form;
  bool agree = false;
};

namespace detail {

/// log Phi^{-1}(e^u); beyond double range the tail model is inverted.
inline double log_inverse(const GrowthFunction& phi, const TailModel& tm, double u) {
  if (u < 700.0) {
    const double t = generalized_inverse(phi, std::exp(u));
    return t == 0.0 ? -kInf : std::log(t);
  }
  if (phi.domain_end() < kInf) return std::log(phi.domain_end());
  switch (tm.kind) {
    case TailModel::Kind::bounded: return kInf;
    case TailModel::Kind::power_log: {
      // log coef + p w + q log w = u
      const double target = u - std::log(tm.coef);
      auto f = [&](double w) { return tm.p * w + tm.q * std::log(w) - target; };
      double hi = std::max(2.0, target / tm.p);
      while (f(hi) < 0.0) hi *= 2.0;
      return bracketed_root(f, 1.0, hi);
    }
    case TailModel::Kind::exponential: {
      // k e^{beta w} w^m = u - log coef, in logs
      const double target = std::log(u - std::log(tm.coef)) - std::log(tm.k);
      auto f = [&](double w) { return tm.beta * w + tm.m * std::log(w) - target; };
      double hi = std::max(2.0, 2.0 * target / tm.beta);
      while (f(hi) < 0.0) hi *= 2.0;
      return bracketed_root(f, 1.0, hi);
    }
    case TailModel::Kind::unknown: break;
  }
  return std::nan("");
}

/// log Phi(e^v) e^{-v/alpha}; beyond double range the tail model is used.
inline double log_form_integrand(const GrowthFunction& phi, const TailModel& tm, double v, double alpha) {
  const double decay = std::exp(-v / alpha);
  if (v < 700.0) {
    const double t = std::exp(v);
    if (t > phi.domain_end()) return kInf;
    const double val = phi(t);
    if (val == kInf) {
      if (tm.kind == TailModel::Kind::exponential) {
        return std::log(tm.coef) * decay + std::exp(std::log(tm.k) + tm.beta * v + tm.m * std::log(v) - v / alpha);
      }
      return kInf;
    }
    return std::log(val) * decay;
  }
  if (phi.domain_end() < kInf) return kInf;
  switch (tm.kind) {
    case TailModel::Kind::bounded: return std::log(tm.limit) * decay;
    case TailModel::Kind::power_log: return (std::log(tm.coef) + tm.p * v + tm.q * std::log(v)) * decay;
    case TailModel::Kind::exponential:
      return std::log(tm.coef) * decay + std::exp(std::log(tm.k) + tm.beta * v + tm.m * std::log(v) - v / alpha);
    case TailModel::Kind::unknown: break;
  }
  return std::nan("");
}

}  // namespace detail

inline PhiDivergenceReport phi_divergence(const GrowthFunction& phi, double alpha, double delta) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidInput, "exponent must be positive");
  if (!(delta > phi(1.0))) throw Error(ErrorCode::InvalidInput, "delta must exceed Phi(1)");
  for (const Piece& p : phi.pieces()) {
    if (p.kind == PieceKind::tabulated) throw Error(ErrorCode::Inconclusive, "tabulated Phi has no certified tail");
  }
  const TailModel tm = phi.tail_model();
  const bool finite_T = phi.domain_end() < kInf;
  PhiDivergenceReport rep;
  rep.direct.id = "phi_divergence";
  rep.log_form.id = "phi_divergence_log_form";

  // Direct form in u = log tau, scales u0 + 2^k.
  const double u0 = std::log(delta);
  std::vector<double> us, D;
  {
    CompensatedSum acc;
    double prev = u0;
    for (int k = 0; k < 24; ++k) {
      const double u = u0 + std::ldexp(1.0, k);
      acc += integrate(
                 [&](double s) {
                   const double w = detail::log_inverse(phi, tm, s);
                   return w == kInf ? 0.0 : std::exp(-w / alpha);
                 },
                 prev, u, {1e-10, 14})
                 .value;
      prev = u;
      us.push_back(u);
      D.push_back(acc.value());
      rep.direct.evidence.push_back({u, acc.value()});
    }
  }
  // Log form in v = log t, from where Phi first reaches delta.
  const double t0 = std::max(1.0, generalized_inverse(phi, delta));
  const double v0 = std::log(t0);
  std::vector<double> vs, Lg;
  {
    CompensatedSum acc;
    double prev = v0;
    bool infinite = false;
    for (int k = 0; k < 24; ++k) {
      const double v = v0 + std::ldexp(1.0, k);
      if (!infinite) {
        if (finite_T && v > std::log(phi.domain_end())) {
          infinite = true;
        } else {
          acc += integrate([&](double s) { return detail::log_form_integrand(phi, tm, s, alpha); }, prev, v, {1e-10, 14})
                     .value;
        }
      }
      prev = v;
      vs.push_back(v);
      Lg.push_back(infinite ? kInf : acc.value());
      rep.log_form.evidence.push_back({v, Lg.back()});
    }
  }

  auto certify = [&](ConditionReport& r, bool log_form) {
    r.certified = true;
    if (finite_T) {
      r.verdict = ConditionVerdict::holds;
      r.method = log_form ? "closed form: log Phi = inf beyond T" : "closed form: Phi^{-1} <= T, integrand >= 1/(tau T^{1/alpha})";
      return;
    }
    switch (tm.kind) {
      case TailModel::Kind::bounded:
        r.verdict = ConditionVerdict::fails;
        r.method = log_form ? "closed form: log Phi bounded, t^{-1-1/alpha} integrable"
                            : "closed form: Phi^{-1} = inf above sup Phi";
        return;
      case TailModel::Kind::power_log:
        if (tm.coef > 0.0 && (tm.p > 0.0 || (tm.p == 0.0 && tm.q > 0.0))) {
          r.verdict = ConditionVerdict::fails;
          r.method = log_form ? "closed form: log Phi ~ p log t, integrable against t^{-1-1/alpha}"
                              : "closed form: Phi^{-1}(tau) grows like a power of tau";
          return;
        }
        break;
      case TailModel::Kind::exponential:
        if (tm.coef > 0.0 && tm.k > 0.0 && tm.beta > 0.0) {
          if (log_form) {
            // log Phi ~ k t^beta log^m t
            const double b = 1.0 / alpha;
            const bool div = tm.beta > b || (tm.beta == b && tm.m >= -1.0);
            r.verdict = div ? ConditionVerdict::holds : ConditionVerdict::fails;
            r.method = "closed form: integrand ~ t^{beta - 1 - 1/alpha} log^m t, divergent iff beta > 1/alpha, or beta = 1/alpha and m >= -1";
          } else {
            // Phi^{-1}(e^u) ~ u^{1/beta} log^{-m/beta} u
            const double g = 1.0 / (alpha * tm.beta);
            const bool div = g < 1.0 || (g == 1.0 && tm.m >= -1.0);
            r.verdict = div ? ConditionVerdict::holds : ConditionVerdict::fails;
            r.method = "closed form: integrand ~ u^{-gamma} log^{m gamma} u with gamma = 1/(alpha beta)";
          }
          return;
        }
        break;
      case TailModel::Kind::unknown: break;
    }
    r.certified = false;
    r.method = "heuristic: tail increments over doubling scales";
    r.verdict = detail::exponent_trend(log_form ? vs : us, log_form ? Lg : D, true, r.note);
  };
  certify(rep.direct, false);
  certify(rep.log_form, true);
  rep.agree = rep.direct.verdict == rep.log_form.verdict;
  return rep;
}

}  // namespace distortion_lab
