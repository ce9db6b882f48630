#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "distortion_lab/construct.hpp"
#include "distortion_lab/core.hpp"
#include "distortion_lab/field.hpp"
#include "distortion_lab/growth.hpp"

namespace distortion_lab {

/// F(f) = integral over omega of phi(P_f) w. An empty omega means the
/// whole mapping box.
struct FunctionalSpec {
  GrowthFunction phi = GrowthFunction::linear(0.0, 1.0);
  Weight weight = Weight::unit();
  std::optional<Box> omega;

  const Box& region(const GridMapping& m) const { return omega ? *omega : m.box(); }
};

namespace detail {

inline void check_weight(const Box& region, const Weight& w) {
  if (w.kind == Weight::Kind::unit) return;
  const int n = region.dim();
  const int per = 5;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= per;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (int i = n - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      x[ui] = region.lo[ui] + (region.hi[ui] - region.lo[ui]) * (static_cast<double>(r % per) + 0.5) / per;
      r /= per;
    }
    const double v = w(x);
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "weight must be positive and finite on omega");
  }
}

inline double phase_sum(const std::vector<Phase>& phases, int n, const GrowthFunction& g) {
  CompensatedSum acc;
  for (const Phase& ph : phases) acc += weighted(g(outer_dilatation(ph.jacobian, n).P), ph.measure);
  return acc.value();
}

/// Volume of the intersection of two boxes.
inline double overlap(const Box& a, const Box& b) {
  double v = 1.0;
  for (std::size_t i = 0; i < a.lo.size(); ++i) {
    const double len = std::min(a.hi[i], b.hi[i]) - std::max(a.lo[i], b.lo[i]);
    if (!(len > 0.0)) return 0.0;
    v *= len;
  }
  return v;
}

}  // namespace detail

/// Exact for analytic sources (sum over the phases); for sampled sources a
/// Riemann sum over the cells whose centre lies in omega.
inline double functional_value(const DilatationField& field, const FunctionalSpec& spec) {
  const GridMapping& m = field.source;
  const Box& region = spec.region(m);
  if (!m.box().contains(region)) throw Error(ErrorCode::CubeOutOfDomain, "omega leaves the mapping box");
  detail::check_weight(region, spec.weight);
  if (m.analytic()) return detail::phase_sum(m.phases(region, spec.weight), m.dim(), spec.phi);
  const double vol = m.cell_volume();
  CompensatedSum acc;
  for (std::size_t c = 0; c < field.size(); ++c) {
    const auto x = m.cell_center(c);
    if (!region.contains_point(x)) continue;
    acc += weighted(spec.phi(field.P[c]), spec.weight(x) * vol);
  }
  return acc.value();
}

inline double functional_value(const GridMapping& m, const FunctionalSpec& spec) {
  if (m.analytic()) {
    const Box& region = spec.region(m);
    if (!m.box().contains(region)) throw Error(ErrorCode::CubeOutOfDomain, "omega leaves the mapping box");
    detail::check_weight(region, spec.weight);
    return detail::phase_sum(m.phases(region, spec.weight), m.dim(), spec.phi);
  }
  return functional_value(dilatation_field(m), spec);
}

/// (1/|Q|) integral over Q of g(P_f) for the cube Q of side h centred at x0.
/// Sampled sources weight each cell by its overlap with Q.
inline double cube_average(const DilatationField& field, const std::vector<double>& x0, double h,
                           const GrowthFunction& g) {
  const GridMapping& m = field.source;
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidInput, "cube side must be positive");
  const Box Q = Box::cube(x0, h);
  if (!m.box().contains(Q, 1e-12)) throw Error(ErrorCode::CubeOutOfDomain, "cube leaves the mapping box");
  const double vol = Q.volume();
  if (m.analytic()) return detail::phase_sum(m.phases(Q), m.dim(), g) / vol;
  CompensatedSum acc;
  for (std::size_t c = 0; c < field.size(); ++c) {
    const double w = detail::overlap(m.cell_box(c), Q);
    if (w > 0.0) acc += weighted(g(field.P[c]), w);
  }
  return acc.value() / vol;
}

inline double cube_average(const GridMapping& m, const std::vector<double>& x0, double h, const GrowthFunction& g) {
  if (m.analytic()) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidInput, "cube side must be positive");
    const Box Q = Box::cube(x0, h);
    if (!m.box().contains(Q, 1e-12)) throw Error(ErrorCode::CubeOutOfDomain, "cube leaves the mapping box");
    return detail::phase_sum(m.phases(Q), m.dim(), g) / Q.volume();
  }
  return cube_average(dilatation_field(m), x0, h, g);
}

/// P_f(x0) against liminf_h liminf_j of cube averages of P_{f_j}; each
/// liminf is the minimum over the tail half of its index range.
struct PointwiseBound {
  double P_limit = 0.0;
  double estimate = 0.0;
  bool holds = false;
  std::vector<double> sides;
  std::vector<std::vector<double>> averages;  // [h][j]
  std::vector<double> inner;                  // liminf over j per h
};

inline double tail_min(const std::vector<double>& v) {
  if (v.empty()) throw Error(ErrorCode::InvalidInput, "empty sequence");
  const std::size_t from = v.size() / 2;
  return *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
}

inline PointwiseBound check_pointwise_bound(const MappingSequence& seq, const std::vector<double>& x0, int j_max,
                                            std::vector<double> sides = {}) {
  if (j_max < 2) throw Error(ErrorCode::InvalidInput, "pointwise bound needs j_max >= 2");
  if (sides.empty()) {
    const int k_max = std::max(2, j_max / 2 - 1);
    for (int k = 1; k <= k_max; ++k) sides.push_back(std::ldexp(1.0, -k));
  }
  PointwiseBound out;
  out.P_limit = outer_dilatation(seq.limit.derivative_at(x0), seq.n).P;
  out.sides = sides;
  const GrowthFunction id = GrowthFunction::linear(0.0, 1.0);
  std::vector<GridMapping> members;
  for (int j = 1; j <= j_max; ++j) members.push_back(seq.member(j));
  for (double h : sides) {
    std::vector<double> row;
    for (const GridMapping& m : members) row.push_back(cube_average(m, x0, h, id));
    out.inner.push_back(tail_min(row));
    out.averages.push_back(std::move(row));
  }
  out.estimate = tail_min(out.inner);
  out.holds = out.P_limit <= out.estimate + 1e-6;
  return out;
}

enum class EvalMode { exact, sampled };

inline const char* to_string(EvalMode m) noexcept { return m == EvalMode::exact ? "exact" : "sampled"; }

enum class Verdict { holds, strict_violation, inconclusive };

inline const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::holds: return "inequality-holds";
    case Verdict::strict_violation: return "strict-violation";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct ExperimentOptions {
  int j_max = 20;
  EvalMode mode = EvalMode::exact;
  // Sampled mode: grid cells along the laminate axis are min(2^{j+3}, cap).
  int cap = 1024;
  int cross = 8;
};

struct SemicontinuityResult {
  std::vector<double> values;  // F(f_j), j = 1..j_max
  std::vector<double> bounds;  // uniform_bound(j)
  double limit_value = 0.0;
  double tail_min = 0.0;
  double tail_max = 0.0;
  std::optional<double> asymptotic;
  double liminf = 0.0;
  std::string liminf_source;
  double margin = 0.0;  // limit - liminf
  double tolerance = 0.0;
  Verdict verdict = Verdict::inconclusive;
  EvalMode mode = EvalMode::exact;
  std::string note;
};

/// phi at P approached through the sequence: from_below uses the left limit.
inline double phi_at(const GrowthFunction& phi, double P, bool from_below) {
  if (!from_below) return phi(P);
  if (P == kInf) return phi.limit_at_infinity();
  return phi.left_limit(P);
}

/// liminf F(f_j) from the asymptotic phase distribution; exact when phi is
/// nondecreasing (left limits are then the limits from below).
inline std::optional<double> asymptotic_liminf(const MappingSequence& seq, const FunctionalSpec& spec, const Box& region) {
  if (!seq.asymptotic) return std::nullopt;
  const auto phases = seq.asymptotic(region, spec.weight);
  CompensatedSum acc;
  for (const AsymptoticPhase& ph : phases) {
    if (ph.from_below && !spec.phi.monotone()) return std::nullopt;
    acc += weighted(phi_at(spec.phi, ph.P, ph.from_below), ph.measure);
  }
  return acc.value();
}

inline SemicontinuityResult semicontinuity_experiment(const MappingSequence& seq, const FunctionalSpec& spec,
                                                      const ExperimentOptions& opt = {}) {
  if (opt.j_max < 3) throw Error(ErrorCode::InvalidInput, "j_max must be >= 3");
  SemicontinuityResult r;
  r.mode = opt.mode;
  const Box region = spec.region(seq.limit);
  detail::check_weight(region, spec.weight);
  const GridOptions grid{opt.cross, opt.cap, 64};
  auto evaluate = [&](const GridMapping& m, int j) {
    if (opt.mode == EvalMode::exact) return functional_value(m, spec);
    return functional_value(dilatation_field(m.with_resolution(detail::member_resolution(seq.n, j, grid)).sample()),
                            spec);
  };
  r.values.resize(static_cast<std::size_t>(opt.j_max));
  r.bounds.resize(static_cast<std::size_t>(opt.j_max));
  for (int j = 1; j <= opt.j_max; ++j) {
    r.values[static_cast<std::size_t>(j - 1)] = evaluate(seq.member(j), j);
    r.bounds[static_cast<std::size_t>(j - 1)] = seq.uniform_bound(j);
  }
  r.limit_value = evaluate(seq.limit, opt.j_max);
  const std::size_t from = r.values.size() / 2;
  r.tail_min = *std::min_element(r.values.begin() + static_cast<std::ptrdiff_t>(from), r.values.end());
  r.tail_max = *std::max_element(r.values.begin() + static_cast<std::ptrdiff_t>(from), r.values.end());
  if (opt.mode == EvalMode::exact) r.asymptotic = asymptotic_liminf(seq, spec, region);
  if (r.asymptotic) {
    r.liminf = *r.asymptotic;
    r.liminf_source = "asymptotic-phases";
  } else {
    r.liminf = r.tail_min;
    r.liminf_source = "tail-minimum";
  }
  r.tolerance = opt.mode == EvalMode::exact ? 1e-9 : 1e-4;
  const double scale = std::max(1.0, std::isfinite(r.liminf) ? std::abs(r.liminf) : 1.0);
  if (r.limit_value == kInf && r.liminf == kInf) {
    r.margin = 0.0;
  } else {
    r.margin = r.limit_value - r.liminf;
  }
  const double spread = r.tail_max - r.tail_min;
  if (!(r.margin > r.tolerance * scale)) {
    r.verdict = Verdict::holds;
  } else if (opt.mode == EvalMode::exact || spread <= 0.5 * r.margin) {
    r.verdict = Verdict::strict_violation;
  } else {
    r.verdict = Verdict::inconclusive;
  }
  if (spread <= r.tolerance * scale && std::isfinite(spread)) {
    r.note = "F(f_j) is constant over the tail, so the tail minimum is the liminf";
  }
  return r;
}

/// Sum over m of liminf_j a[m][j] against liminf_j of sum over m, liminf
/// taken over the tail half of j. Signed rows need a summable dominating
/// b with |a[m][j]| <= b[m].
struct FatouResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline FatouResult fatou_series(const std::vector<std::vector<double>>& a, const std::vector<double>& b = {}) {
  if (a.empty() || a.front().empty()) throw Error(ErrorCode::InvalidInput, "fatou: empty array");
  const std::size_t J = a.front().size();
  for (const auto& row : a) {
    if (row.size() != J) throw Error(ErrorCode::InvalidInput, "fatou: ragged array");
  }
  const bool signed_rows =
      std::any_of(a.begin(), a.end(), [](const auto& row) { return std::any_of(row.begin(), row.end(), [](double x) { return x < 0.0; }); });
  if (signed_rows) {
    if (b.size() != a.size()) throw Error(ErrorCode::DominationFailed, "fatou: negative entries without a dominating sequence");
    CompensatedSum bs;
    for (std::size_t m = 0; m < a.size(); ++m) {
      if (!std::isfinite(b[m])) throw Error(ErrorCode::DominationFailed, "fatou: dominating sequence not summable");
      bs += b[m];
      for (double x : a[m]) {
        if (std::abs(x) > b[m]) throw Error(ErrorCode::DominationFailed, "fatou: |a_mj| exceeds b_m");
      }
    }
    if (!std::isfinite(bs.value())) throw Error(ErrorCode::DominationFailed, "fatou: dominating sequence not summable");
  }
  FatouResult r;
  CompensatedSum lhs;
  for (const auto& row : a) lhs += tail_min(row);
  r.lhs = lhs.value();
  std::vector<double> sums(J);
  for (std::size_t j = 0; j < J; ++j) {
    CompensatedSum s;
    for (const auto& row : a) s += row[j];
    sums[j] = s.value();
  }
  r.rhs = tail_min(sums);
  double mag = 0.0;
  for (const auto& row : a) {
    for (double x : row) mag += std::abs(x);
  }
  r.holds = r.lhs <= r.rhs + 1e-12 * std::max(1.0, mag / static_cast<double>(J));
  return r;
}

}  // namespace distortion_lab
