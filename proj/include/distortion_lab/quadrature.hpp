#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "distortion_lab/core.hpp"

namespace distortion_lab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

struct QuadratureOptions {
  double rel_tol = 1e-12;
  unsigned max_depth = 24;
};

/// Adaptive 15-point Gauss-Kronrod on a finite interval.
template <typename F>
QuadResult integrate(F&& f, double a, double b, QuadratureOptions opts = {}) {
  if (a == b) return {};
  if (a > b) {
    auto r = integrate(f, b, a, opts);
    return {-r.value, r.error};
  }
  // Boost compares an unscaled error estimate with a scaled tolerance, so
  // short intervals would recurse to max_depth. Integrate on [-1, 1].
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&](double x) { return f(mid + half * x); }, -1.0, 1.0, opts.max_depth, opts.rel_tol, &err);
  return {v * half, err * half};
}

/// Large-t decay class of an integrand on [a, inf).
enum class TailDecay {
  power,           // ~ t^-s, s > 1
  log_borderline,  // ~ 1 / (t log^m t), m > 1
  exponential,     // faster than any power
};

/// Integral over [a, inf). The integrand is pulled back to a logarithmic
/// variable so that algebraic decay becomes exponential decay, then handed
/// to exp-sinh quadrature.
template <typename F>
QuadResult integrate_to_infinity(F&& f, double a, TailDecay decay, QuadratureOptions opts = {}) {
  QuadResult head;
  const double knee = decay == TailDecay::log_borderline ? kE : 1.0;
  double start = a;
  if (a < knee) {
    head = integrate(f, a, knee, opts);
    start = knee;
  }
  boost::math::quadrature::exp_sinh<double> engine(12);
  double err = 0.0;
  double tail = 0.0;
  if (decay == TailDecay::log_borderline) {
    // t = exp(exp(v))
    const double v0 = std::log(std::log(start));
    auto g = [&](double v) {
      const double ev = std::exp(v);
      const double t = std::exp(ev);
      if (!std::isfinite(t)) return 0.0;
      const double ft = f(t);
      const double out = ft * t * ev;
      return std::isfinite(out) ? out : 0.0;
    };
    tail = engine.integrate([&](double w) { return g(v0 + w); }, 0.0, kInf, opts.rel_tol, &err);
  } else {
    const double u0 = std::log(start);
    auto g = [&](double u) {
      const double t = std::exp(u);
      if (!std::isfinite(t)) return 0.0;
      const double out = f(t) * t;
      return std::isfinite(out) ? out : 0.0;
    };
    tail = engine.integrate([&](double w) { return g(u0 + w); }, 0.0, kInf, opts.rel_tol, &err);
  }
  return {head.value + tail, head.error + err};
}

/// Smallest point of [lo, hi] where a monotone predicate becomes true,
/// assuming pred(hi) is true. Bisection to adjacent doubles.
template <typename Pred>
double bisect_first_true(Pred&& pred, double lo, double hi) {
  if (pred(lo)) return lo;
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Root of a continuous function with a sign change on [lo, hi].
template <typename F>
double bracketed_root(F&& f, double lo, double hi) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = 300;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int count) {
  std::vector<double> x(static_cast<std::size_t>(count)), w(static_cast<std::size_t>(count));
  const int half = (count + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= count; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = count * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= count; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = count * (z * p0 - p1) / (z * z - 1.0);
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(count - 1 - i)] = z;
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    w[static_cast<std::size_t>(i)] = wi;
    w[static_cast<std::size_t>(count - 1 - i)] = wi;
  }
  return {x, w};
}

/// Chebyshev interpolant of a smooth f on [a, b] and its primitive
/// W(x) = int_a^x f. The degree doubles from 32 until the trailing
/// coefficients fall below 1e-15 of the largest (cap 1024).
class ChebyshevPrimitive {
 public:
  ChebyshevPrimitive() = default;

  template <typename F>
  ChebyshevPrimitive(F&& f, double a, double b) : a_(a), b_(b) {
    for (int count = 32;; count *= 2) {
      std::vector<double> c = coefficients(f, count);
      double top = 0.0;
      for (double v : c) top = std::max(top, std::abs(v));
      const double tail = std::max({std::abs(c[count - 1]), std::abs(c[count - 2]), std::abs(c[count - 3])});
      if (tail <= 1e-15 * top || count >= 1024) {
        build_primitive(c);
        break;
      }
    }
  }

  /// int_a^x f for x in [a, b].
  double operator()(double x) const {
    if (prim_.empty()) return 0.0;
    return clenshaw(prim_, x);
  }

  double total() const { return (*this)(b_); }

 private:
  template <typename F>
  std::vector<double> coefficients(F& f, int count) const {
    const double mid = 0.5 * (a_ + b_);
    const double half = 0.5 * (b_ - a_);
    std::vector<double> fx(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      fx[static_cast<std::size_t>(k)] = f(mid + half * std::cos(kPi * (k + 0.5) / count));
    }
    std::vector<double> c(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      double s = 0.0;
      for (int k = 0; k < count; ++k) s += fx[static_cast<std::size_t>(k)] * std::cos(kPi * j * (k + 0.5) / count);
      c[static_cast<std::size_t>(j)] = 2.0 * s / count;
    }
    return c;
  }

  void build_primitive(const std::vector<double>& c) {
    const std::size_t count = c.size();
    const double con = 0.25 * (b_ - a_);
    prim_.assign(count, 0.0);
    double sum = 0.0;
    double fac = 1.0;
    for (std::size_t j = 1; j + 1 < count; ++j) {
      prim_[j] = con * (c[j - 1] - c[j + 1]) / static_cast<double>(j);
      sum += fac * prim_[j];
      fac = -fac;
    }
    prim_[count - 1] = con * c[count - 2] / static_cast<double>(count - 1);
    sum += fac * prim_[count - 1];
    prim_[0] = 2.0 * sum;
  }

  double clenshaw(const std::vector<double>& c, double x) const {
    const double y = (2.0 * x - a_ - b_) / (b_ - a_);
    const double y2 = 2.0 * y;
    double d = 0.0, dd = 0.0;
    for (std::size_t j = c.size() - 1; j >= 1; --j) {
      const double sv = d;
      d = y2 * d - dd + c[j];
      dd = sv;
    }
    return y * d - dd + 0.5 * c[0];
  }

  double a_ = 0.0;
  double b_ = 1.0;
  std::vector<double> prim_;
};

}  // namespace distortion_lab
