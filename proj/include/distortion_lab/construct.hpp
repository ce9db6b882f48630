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
#include "distortion_lab/field.hpp"
#include "distortion_lab/growth.hpp"

namespace distortion_lab {

enum class SequenceKind { laminate, collapse, cantor, left_jump, constant };

inline const char* to_string(SequenceKind k) noexcept {
  switch (k) {
    case SequenceKind::laminate: return "laminate";
    case SequenceKind::collapse: return "collapse";
    case SequenceKind::cantor: return "cantor";
    case SequenceKind::left_jump: return "left_jump";
    case SequenceKind::constant: return "constant";
  }
  return "unknown";
}

/// Part of the region on which P_{f_j} tends to P: either P_{f_j} = P for
/// all large j (exact) or P_{f_j} increases to P (from_below).
struct AsymptoticPhase {
  double measure = 0.0;
  double P = 1.0;
  bool from_below = false;
};

/// Grid sizes for generated maps: `cross` cells on the first n-1 axes and
/// min(2^{j+3}, cap) along x_n for member j.
struct GridOptions {
  int cross = 8;
  int cap = 1024;
  int limit_cells = 64;
};

/// f_j (j >= 1), the limit f, a certified bound on sup |f_j - f| over the
/// unit box, and the limiting distribution of P_{f_j}.
struct MappingSequence {
  SequenceKind kind = SequenceKind::constant;
  std::vector<std::pair<std::string, double>> params;
  int n = 3;
  std::function<GridMapping(int)> member;
  GridMapping limit = GridMapping::affine(Box::unit(3), {2, 2, 2}, AffineMap::identity(3));
  std::function<double(int)> uniform_bound;
  std::function<std::vector<AsymptoticPhase>(const Box&, const Weight&)> asymptotic;
  std::string note;

  double param(const std::string& key) const {
    for (const auto& [k, v] : params) {
      if (k == key) return v;
    }
    throw Error(ErrorCode::InvalidInput, "sequence has no parameter " + key);
  }
};

namespace detail {

inline std::vector<int> member_resolution(int n, int j, const GridOptions& g) {
  std::vector<int> res(static_cast<std::size_t>(n), g.cross);
  const int along = j + 3 >= 30 ? g.cap : std::min(1 << (j + 3), g.cap);
  res.back() = std::max(2, along);
  return res;
}

inline std::vector<int> limit_resolution(int n, const GridOptions& g) {
  std::vector<int> res(static_cast<std::size_t>(n), g.cross);
  res.back() = g.limit_cells;
  return res;
}

inline void check_dim(int n) {
  if (n < 2) throw Error(ErrorCode::ParamOutOfRange, "dimension n must be >= 2");
}

/// P of the axis stretch diag(1, ..., 1, c).
inline double stretch_P(double c, int n) {
  std::vector<double> d(static_cast<std::size_t>(n), 1.0);
  d.back() = c;
  return outer_dilatation(AffineMap::diagonal(d).A).P;
}

inline double total_weight(const Box& region, int axis, const Weight& w) {
  const AxisPrimitive W(region, axis, w);
  return W(region.hi[static_cast<std::size_t>(axis)]) - W(region.lo[static_cast<std::size_t>(axis)]);
}

inline GridMapping periodic_map(int n, std::vector<int> res, double period, std::vector<double> widths,
                                std::vector<double> slopes) {
  auto psi = std::make_shared<PeriodicProfile>(period, std::move(widths), std::move(slopes));
  return GridMapping::profile(Box::unit(n), std::move(res), n - 1, std::move(psi));
}

}  // namespace detail

/// y_i = x_i (i < n), y_n = c x_n on the unit box.
inline GridMapping affine_stretch(double c, int n, std::vector<int> res = {}) {
  detail::check_dim(n);
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::ParamOutOfRange, "stretch factor must be positive");
  if (res.empty()) res.assign(static_cast<std::size_t>(n), 8);
  return detail::periodic_map(n, std::move(res), 1.0, {1.0}, {c});
}

namespace detail {

// Laminate without the t >= 1 restriction (the collapse uses t1 < 1).
inline MappingSequence laminate_core(double t1, double t2, double lambda, int n, const GridOptions& g) {
  MappingSequence s;
  s.kind = SequenceKind::laminate;
  s.n = n;
  const double t0 = lambda * t1 + (1.0 - lambda) * t2;
  s.params = {{"t1", t1}, {"t2", t2}, {"lambda", lambda}, {"t0", t0}};
  s.member = [=](int j) {
    if (j < 1) throw Error(ErrorCode::ParamOutOfRange, "sequence index starts at 1");
    const double p = std::ldexp(1.0, -j);
    return periodic_map(n, member_resolution(n, j, g), p, {lambda * p, (1.0 - lambda) * p}, {t1, t2});
  };
  s.limit = affine_stretch(t0, n, limit_resolution(n, g));
  s.uniform_bound = [=](int j) { return t0 * std::ldexp(1.0, -j); };
  const double P1 = stretch_P(t1, n), P2 = stretch_P(t2, n);
  s.asymptotic = [=](const Box& region, const Weight& w) {
    const double W = total_weight(region, n - 1, w);
    return std::vector<AsymptoticPhase>{{lambda * W, P1, false}, {(1.0 - lambda) * W, P2, false}};
  };
  return s;
}

}  // namespace detail

/// Stretches t1 and t2 alternating on slabs of width lambda 2^-j and
/// (1 - lambda) 2^-j along x_n, glued continuously; limit stretch t0.
inline MappingSequence laminate_sequence(double t1, double t2, double lambda, int n, GridOptions g = {}) {
  detail::check_dim(n);
  if (!(t1 >= 1.0) || !(t2 >= 1.0) || !std::isfinite(t1) || !std::isfinite(t2)) {
    throw Error(ErrorCode::ParamOutOfRange, "laminate: t1 and t2 must lie in [1, inf)");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::ParamOutOfRange, "laminate: lambda must lie in [0, 1]");
  return detail::laminate_core(t1, t2, lambda, n, g);
}

/// Laminate of tau_*^{1-n} and tau_* with P = tau_* on both branches, whose
/// limit is the stretch tau0.
inline MappingSequence collapse_sequence(double tau0, double tau_star, int n, GridOptions g = {}) {
  detail::check_dim(n);
  if (!(tau0 >= 1.0) || !(tau_star > tau0) || !std::isfinite(tau_star)) {
    throw Error(ErrorCode::ParamOutOfRange, "collapse: need tau_* > tau0 >= 1");
  }
  const double t1 = std::pow(tau_star, 1.0 - n);
  const double lambda = (tau_star - tau0) / (tau_star - t1);
  MappingSequence s = detail::laminate_core(t1, tau_star, lambda, n, g);
  s.kind = SequenceKind::collapse;
  s.params = {{"tau0", tau0}, {"tau_star", tau_star}, {"t1", t1}, {"t2", tau_star}, {"lambda", lambda}};
  // The limit is the stretch tau0 itself; lambda t1 + (1 - lambda) t2 equals
  // it up to rounding.
  s.limit = affine_stretch(tau0, n, detail::limit_resolution(n, g));
  const double t0 = lambda * t1 + (1.0 - lambda) * tau_star;
  s.uniform_bound = [=](int j) { return std::max(t0, tau0) * std::ldexp(1.0, -j); };
  s.params.push_back({"K", std::pow(tau_star, n - 1)});
  s.note = "K of every member equals tau_*^(n-1) on both branches";
  return s;
}

/// tau_j = tau0 2^j.
inline std::function<double(int)> doubling_schedule(double tau0) {
  return [tau0](int j) { return tau0 * std::ldexp(1.0, j); };
}

/// Cantor staircases: member j uses level j + 1 with slope tau_j^{1-n} on
/// the surviving set (P = tau_j) and tau0 on removed intervals (P = tau0);
/// the limit has slope 0 on the Cantor set E (P = inf, |E| = lambda).
inline MappingSequence cantor_sequence(double tau0, std::function<double(int)> tau, double lambda, int n,
                                       GridOptions g = {}) {
  detail::check_dim(n);
  if (!(tau0 >= 1.0) || !std::isfinite(tau0)) throw Error(ErrorCode::ParamOutOfRange, "cantor: tau0 must lie in [1, inf)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorCode::ParamOutOfRange, "cantor: lambda must lie in (0, 1)");
  for (int j = 1; j < 30; ++j) {
    const double a = tau(j), b = tau(j + 1);
    if (!(a >= 1.0) || !(b >= a)) throw Error(ErrorCode::ParamOutOfRange, "cantor: tau_j must be nondecreasing and >= 1");
  }
  if (!(tau(30) > tau(1))) throw Error(ErrorCode::ParamOutOfRange, "cantor: tau_j must grow without bound");
  MappingSequence s;
  s.kind = SequenceKind::cantor;
  s.n = n;
  const double q = (1.0 - lambda) / (2.0 - lambda);
  s.params = {{"tau0", tau0}, {"lambda", lambda}, {"q", q}, {"c", (1.0 - lambda) * tau0}};
  s.member = [=](int j) {
    if (j < 1) throw Error(ErrorCode::ParamOutOfRange, "sequence index starts at 1");
    auto psi = std::make_shared<CantorProfile>(lambda, j + 1, std::pow(tau(j), 1.0 - n), tau0);
    return GridMapping::profile(Box::unit(n), detail::member_resolution(n, j, g), n - 1, std::move(psi));
  };
  auto limit_psi = std::make_shared<CantorProfile>(lambda, -1, 0.0, tau0);
  s.limit = GridMapping::profile(Box::unit(n), detail::limit_resolution(n, g), n - 1, limit_psi);
  s.uniform_bound = [=](int j) {
    // On [0, 1]: psi_j - psi = a F_L - b (F_L - F) with 0 <= F_L - F <= |E_L| - lambda.
    const CantorProfile member(lambda, j + 1, std::pow(tau(j), 1.0 - n), tau0);
    const double a = std::pow(tau(j), 1.0 - n);
    const double EL = member.set_measure();
    return std::max(a * EL, tau0 * (EL - lambda));
  };
  const double P0 = detail::stretch_P(tau0, n);
  const GridMapping limit = s.limit;
  s.asymptotic = [=](const Box& region, const Weight& w) {
    const auto ph = limit.phases(region, w);
    // Phase 0 is the set E (slope 0), phase 1 the removed intervals.
    std::vector<AsymptoticPhase> out{{ph[0].measure, kInf, true}};
    if (ph.size() > 1) out.push_back({ph[1].measure, P0, false});
    return out;
  };
  return s;
}

/// t_j = T - (T - 1) 2^-j.
inline std::function<double(int)> left_jump_schedule(double T) {
  return [T](int j) { return T - (T - 1.0) * std::ldexp(1.0, -j); };
}

/// Stretches t_j increasing to T; the limit is the stretch T.
inline MappingSequence left_jump_sequence(double T, std::function<double(int)> t, int n, GridOptions g = {}) {
  detail::check_dim(n);
  if (!(T > 1.0) || !std::isfinite(T)) throw Error(ErrorCode::ParamOutOfRange, "left_jump: T must be > 1");
  for (int j = 1; j < 30; ++j) {
    const double a = t(j), b = t(j + 1);
    if (!(a >= 1.0) || !(b > a) || !(b < T)) {
      throw Error(ErrorCode::ParamOutOfRange, "left_jump: t_j must increase within [1, T)");
    }
  }
  MappingSequence s;
  s.kind = SequenceKind::left_jump;
  s.n = n;
  s.params = {{"T", T}};
  s.member = [=](int j) {
    if (j < 1) throw Error(ErrorCode::ParamOutOfRange, "sequence index starts at 1");
    return affine_stretch(t(j), n, detail::member_resolution(n, j, g));
  };
  s.limit = affine_stretch(T, n, detail::limit_resolution(n, g));
  s.uniform_bound = [=](int j) { return T - t(j); };
  const double PT = detail::stretch_P(T, n);
  s.asymptotic = [=](const Box& region, const Weight& w) {
    return std::vector<AsymptoticPhase>{{detail::total_weight(region, n - 1, w), PT, true}};
  };
  return s;
}

/// f_j = f for every j.
inline MappingSequence constant_sequence(const GridMapping& f) {
  MappingSequence s;
  s.kind = SequenceKind::constant;
  s.n = f.dim();
  s.member = [f](int) { return f; };
  s.limit = f;
  s.uniform_bound = [](int) { return 0.0; };
  const int n = f.dim();
  s.asymptotic = [f, n](const Box& region, const Weight& w) {
    std::vector<AsymptoticPhase> out;
    for (const Phase& ph : f.phases(region, w)) out.push_back({ph.measure, outer_dilatation(ph.jacobian, n).P, false});
    return out;
  };
  return s;
}

/// max over grid nodes of |f_j - f| (Euclidean).
inline double node_distance(const GridMapping& a, const GridMapping& b) {
  const std::size_t count = a.node_count();
  std::vector<double> best(count, 0.0);
  parallel_for(count, [&](std::size_t k) {
    const auto x = a.node_point(a.node_index(k));
    const auto ya = a(x), yb = b(x);
    double s = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i) s += (ya[i] - yb[i]) * (ya[i] - yb[i]);
    best[k] = std::sqrt(s);
  });
  return *std::max_element(best.begin(), best.end());
}

/// The four stock sequences used to probe a growth function.
inline std::vector<MappingSequence> stock_sequences(int n) {
  return {laminate_sequence(1.0, 3.0, 0.5, n), collapse_sequence(1.5, 2.0, n),
          cantor_sequence(2.0, doubling_schedule(2.0), 0.5, n), left_jump_sequence(2.0, left_jump_schedule(2.0), n)};
}

enum class DispatchReason { non_convex, non_monotone, left_discontinuous, discontinuous_at_infinity, certified_good };

inline const char* to_string(DispatchReason r) noexcept {
  switch (r) {
    case DispatchReason::non_convex: return "non-convex";
    case DispatchReason::non_monotone: return "non-monotone";
    case DispatchReason::left_discontinuous: return "left-discontinuous";
    case DispatchReason::discontinuous_at_infinity: return "constant-on-interval";
    case DispatchReason::certified_good: return "certified-good";
  }
  return "unknown";
}

struct Dispatch {
  DispatchReason reason = DispatchReason::certified_good;
  std::optional<MappingSequence> sequence;
  std::string witness;
  // Evidence of the scans over the sample grid.
  std::size_t grid_points = 0;
  double worst_drop = 0.0;
  double worst_convexity_gap = 0.0;
  double t1 = 0.0, t2 = 0.0, lambda = 0.0;
  double tau0 = 0.0, tau_star = 0.0;
  double T = kInf;
};

namespace detail {

/// Geometric grid on [1, 1e6] (4096 points) plus breakpoints, their
/// neighbours and T0 when it lies inside.
inline std::vector<double> dispatch_grid(const GrowthFunction& phi) {
  std::vector<double> out;
  const int count = 4096;
  for (int i = 0; i < count; ++i) out.push_back(std::pow(1e6, static_cast<double>(i) / (count - 1)));
  out.back() = 1e6;
  for (double b : phi.breakpoints()) {
    for (double t : {b, b * (1.0 - 1e-9), b * (1.0 + 1e-9)}) {
      if (t >= 1.0 && t <= 1e6) out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Sequence violating lower semicontinuity for a bad Phi, tested in the
/// order: monotonicity, convexity, left continuity at a finite T,
/// continuity at infinity. Goodness is certified on the sample grid only.
inline Dispatch counterexample_for(const GrowthFunction& phi, int n) {
  detail::check_dim(n);
  Dispatch d;
  const std::vector<double> grid = detail::dispatch_grid(phi);
  d.grid_points = grid.size();
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = phi(grid[i]);

  // Largest drop Phi(tau0) - Phi(tau_*) over tau0 < tau_*.
  std::size_t arg_max = 0, best_i = 0, best_k = 0;
  double best = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (v[k - 1] > v[arg_max]) arg_max = k - 1;
    const double drop = v[arg_max] - v[k];
    if (drop > best) {
      best = drop;
      best_i = arg_max;
      best_k = k;
    }
  }
  d.worst_drop = best;
  if (best > 1e-9 * std::max(1.0, std::abs(v[best_k]))) {
    d.reason = DispatchReason::non_monotone;
    d.tau0 = grid[best_i];
    d.tau_star = grid[best_k];
    d.sequence = collapse_sequence(d.tau0, d.tau_star, n);
    std::ostringstream os;
    os.precision(17);
    os << "Phi(" << d.tau0 << ") = " << v[best_i] << " > Phi(" << d.tau_star << ") = " << v[best_k];
    d.witness = os.str();
    return d;
  }

  // Worst midpoint-type gap Phi(l a + (1-l) b) - (l Phi(a) + (1-l) Phi(b)).
  double gap_best = 0.0;
  for (std::size_t stride : {1, 2, 8, 64, 512}) {
    for (std::size_t i = 0; i + stride < grid.size(); ++i) {
      const double a = grid[i], b = grid[i + stride];
      const double fa = v[i], fb = v[i + stride];
      if (!std::isfinite(fb)) continue;
      for (int k = 1; k < 64; ++k) {
        const double l = k / 64.0;
        const double rhs = l * fa + (1.0 - l) * fb;
        const double mid = phi(l * a + (1.0 - l) * b);
        const double rel = (mid - rhs) / std::max(1.0, std::abs(rhs));
        if (rel > gap_best) {
          gap_best = rel;
          d.t1 = a;
          d.t2 = b;
          d.lambda = l;
        }
      }
    }
  }
  d.worst_convexity_gap = gap_best;
  if (gap_best > 1e-8) {
    d.reason = DispatchReason::non_convex;
    d.sequence = laminate_sequence(d.t1, d.t2, d.lambda, n);
    std::ostringstream os;
    os.precision(17);
    const double t0 = d.lambda * d.t1 + (1.0 - d.lambda) * d.t2;
    os << "Phi(" << t0 << ") = " << phi(t0) << " > " << d.lambda << " Phi(" << d.t1 << ") + " << 1.0 - d.lambda
       << " Phi(" << d.t2 << ") = " << d.lambda * phi(d.t1) + (1.0 - d.lambda) * phi(d.t2);
    d.witness = os.str();
    return d;
  }

  const double T0 = phi.domain_end();
  if (T0 < kInf && T0 > 1.0) {
    const double left = phi.left_limit(T0);
    const double at = phi(T0);
    if (at > left + 1e-12 * std::max(1.0, std::abs(left))) {
      d.reason = DispatchReason::left_discontinuous;
      d.T = T0;
      d.sequence = left_jump_sequence(T0, left_jump_schedule(T0), n);
      std::ostringstream os;
      os.precision(17);
      os << "Phi(" << T0 << ") = " << at << " > Phi(" << T0 << " - 0) = " << left;
      d.witness = os.str();
      return d;
    }
  }

  if (T0 == kInf) {
    const double lim = phi.limit_at_infinity();
    const double at = phi(kInf);
    if (at > lim + 1e-12 * std::max(1.0, std::abs(lim))) {
      d.reason = DispatchReason::discontinuous_at_infinity;
      d.sequence = cantor_sequence(2.0, doubling_schedule(2.0), 0.5, n);
      std::ostringstream os;
      os.precision(17);
      os << "Phi(inf) = " << at << " > lim Phi(t) = " << lim;
      const bool constant = std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
      if (constant) os << "; Phi is constant on [1, inf)";
      d.witness = os.str();
      return d;
    }
  }

  d.reason = DispatchReason::certified_good;
  std::ostringstream os;
  os << "no witness on " << grid.size() << " grid points in [1, 1e6]: nondecreasing, convex (" << 63
     << " interior weights per pair), continuous from the left";
  d.witness = os.str();
  return d;
}

}  // namespace distortion_lab
