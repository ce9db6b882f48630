#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "distortion_lab/core.hpp"
#include "distortion_lab/growth.hpp"
#include "distortion_lab/quadrature.hpp"

namespace distortion_lab {

/// Axis-aligned box prod [lo_i, hi_i].
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box unit(int n) {
    return {std::vector<double>(static_cast<std::size_t>(n), 0.0), std::vector<double>(static_cast<std::size_t>(n), 1.0)};
  }
  static Box cube(const std::vector<double>& center, double side) {
    Box b{center, center};
    for (std::size_t i = 0; i < center.size(); ++i) {
      b.lo[i] = center[i] - 0.5 * side;
      b.hi[i] = center[i] + 0.5 * side;
    }
    return b;
  }

  int dim() const noexcept { return static_cast<int>(lo.size()); }
  double side(int i) const { return hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]; }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= side(i);
    return v;
  }
  std::vector<double> center() const {
    std::vector<double> c(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }
  /// Containment with a relative slack for rounding in derived boxes.
  bool contains(const Box& inner, double slack = 1e-12) const {
    if (inner.dim() != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
      const double tol = slack * std::max(1.0, std::abs(side(i)));
      if (inner.lo[static_cast<std::size_t>(i)] < lo[static_cast<std::size_t>(i)] - tol) return false;
      if (inner.hi[static_cast<std::size_t>(i)] > hi[static_cast<std::size_t>(i)] + tol) return false;
    }
    return true;
  }
  bool contains_point(const std::vector<double>& x) const {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    return true;
  }
  void validate(const std::string& where) const {
    if (lo.size() != hi.size() || lo.size() < 2) throw Error(ErrorCode::InvalidInput, where + ": box needs n >= 2 axes");
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(hi[i] > lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
        throw Error(ErrorCode::InvalidInput, where + ": degenerate axis " + std::to_string(i));
      }
    }
  }
};

/// Density Psi of the functional: 1, the spherical 1/(1+|x|^2)^n, or a
/// caller-supplied positive continuous function.
struct Weight {
  enum class Kind { unit, spherical, custom };
  Kind kind = Kind::unit;
  std::function<double(const std::vector<double>&)> fn;
  std::string label = "unit";

  static Weight unit() { return {}; }
  static Weight spherical() { return {Kind::spherical, {}, "spherical"}; }
  static Weight custom(std::function<double(const std::vector<double>&)> f, std::string label) {
    return {Kind::custom, std::move(f), std::move(label)};
  }

  double operator()(const std::vector<double>& x) const {
    switch (kind) {
      case Kind::unit: return 1.0;
      case Kind::spherical: {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::pow(1.0 + r2, -static_cast<double>(x.size()));
      }
      case Kind::custom: return fn(x);
    }
    return 1.0;
  }
};

/// Primitive along `axis` of the weight integrated over the cross-section of
/// `region`: W(s) = int_{lo_axis}^{s} int_{cross} w dx' ds. Unit weights are
/// exact; other weights use tensor Gauss-Legendre over the cross-section and a
/// Chebyshev primitive along the axis.
class AxisPrimitive {
 public:
  AxisPrimitive(const Box& region, int axis, const Weight& w) : lo_(region.lo[static_cast<std::size_t>(axis)]) {
    double cross = 1.0;
    for (int i = 0; i < region.dim(); ++i) {
      if (i != axis) cross *= region.side(i);
    }
    cross_ = cross;
    if (w.kind == Weight::Kind::unit) return;
    unit_ = false;
    const int n = region.dim();
    const int order = n <= 3 ? 24 : (n == 4 ? 12 : 6);
    const auto [gx, gw] = gauss_legendre(order);
    std::vector<int> others;
    for (int i = 0; i < n; ++i) {
      if (i != axis) others.push_back(i);
    }
    auto marginal = [&, gx = gx, gw = gw](double s) {
      std::vector<double> x(static_cast<std::size_t>(n));
      x[static_cast<std::size_t>(axis)] = s;
      std::vector<int> idx(others.size(), 0);
      CompensatedSum acc;
      while (true) {
        double wt = 1.0;
        for (std::size_t k = 0; k < others.size(); ++k) {
          const auto ax = static_cast<std::size_t>(others[k]);
          const double mid = 0.5 * (region.lo[ax] + region.hi[ax]);
          const double half = 0.5 * (region.hi[ax] - region.lo[ax]);
          x[ax] = mid + half * gx[static_cast<std::size_t>(idx[k])];
          wt *= half * gw[static_cast<std::size_t>(idx[k])];
        }
        acc += wt * w(x);
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == order) idx[k++] = 0;
        if (k == idx.size()) break;
      }
      return acc.value();
    };
    cheb_ = ChebyshevPrimitive(marginal, region.lo[static_cast<std::size_t>(axis)],
                               region.hi[static_cast<std::size_t>(axis)]);
  }

  double operator()(double s) const { return unit_ ? cross_ * (s - lo_) : cheb_(s); }
  bool unit() const noexcept { return unit_; }
  double cross_section() const noexcept { return cross_; }

 private:
  double lo_ = 0.0;
  double cross_ = 1.0;
  bool unit_ = true;
  ChebyshevPrimitive cheb_;
};

/// One-dimensional profile psi for maps y = x + (psi(x_axis) - x_axis) e_axis.
/// Slopes are piecewise constant; at a segment end the lower segment wins.
class Profile {
 public:
  virtual ~Profile() = default;
  virtual double value(double x) const = 0;
  virtual double slope(double x) const = 0;
  /// Distinct slopes in a fixed order.
  virtual std::vector<double> slopes() const = 0;
  /// k-th entry: |{x in [lo, hi] : psi'(x) = slopes()[k]}|.
  virtual std::vector<double> lengths(double lo, double hi) const = 0;
  /// k-th entry: integral of w over the same set, given W' = w.
  virtual std::vector<double> integrals(double lo, double hi, const AxisPrimitive& W) const = 0;
  /// Largest slope, a Lipschitz constant of psi.
  virtual double lipschitz() const {
    const auto s = slopes();
    return *std::max_element(s.begin(), s.end());
  }
};

/// Periodic piecewise-linear profile with psi(0) = 0 and
/// psi(x + period) = psi(x) + increment.
class PeriodicProfile final : public Profile {
 public:
  PeriodicProfile(double period, std::vector<double> widths, std::vector<double> seg_slopes)
      : period_(period), widths_(std::move(widths)), seg_slopes_(std::move(seg_slopes)) {
    if (!(period_ > 0.0) || widths_.empty() || widths_.size() != seg_slopes_.size()) {
      throw Error(ErrorCode::ParamOutOfRange, "periodic profile: bad period or segments");
    }
    double off = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < widths_.size(); ++i) {
      if (widths_[i] < 0.0 || !(seg_slopes_[i] >= 0.0)) {
        throw Error(ErrorCode::ParamOutOfRange, "periodic profile: negative width or slope");
      }
      offsets_.push_back(off);
      partial_.push_back(acc);
      off += widths_[i];
      acc += widths_[i] * seg_slopes_[i];
    }
    increment_ = acc;
    if (std::abs(off - period_) > 1e-12 * period_) {
      throw Error(ErrorCode::ParamOutOfRange, "periodic profile: widths must sum to the period");
    }
    for (std::size_t i = 0; i < seg_slopes_.size(); ++i) {
      auto it = std::find(distinct_.begin(), distinct_.end(), seg_slopes_[i]);
      if (it == distinct_.end()) it = distinct_.insert(distinct_.end(), seg_slopes_[i]);
      slot_.push_back(static_cast<std::size_t>(it - distinct_.begin()));
    }
  }

  double period() const noexcept { return period_; }
  double increment() const noexcept { return increment_; }
  const std::vector<double>& widths() const noexcept { return widths_; }
  const std::vector<double>& segment_slopes() const noexcept { return seg_slopes_; }

  double value(double x) const override {
    const double m = std::floor(x / period_);
    const double r = x - m * period_;
    const std::size_t i = segment(r, false);
    const double within = std::min(r - offsets_[i], widths_[i]);
    return m * increment_ + partial_[i] + seg_slopes_[i] * within;
  }

  double slope(double x) const override {
    const double m = std::floor(x / period_);
    double r = x - m * period_;
    if (r == 0.0) r = period_;
    return seg_slopes_[segment(r, true)];
  }

  std::vector<double> slopes() const override { return distinct_; }

  std::vector<double> lengths(double lo, double hi) const override {
    std::vector<double> out(distinct_.size(), 0.0);
    for (std::size_t i = 0; i < widths_.size(); ++i) {
      out[slot_[i]] += covered(hi, i) - covered(lo, i);
    }
    return out;
  }

  std::vector<double> integrals(double lo, double hi, const AxisPrimitive& W) const override {
    std::vector<CompensatedSum> acc(distinct_.size());
    const auto m0 = static_cast<long long>(std::floor(lo / period_));
    const auto m1 = static_cast<long long>(std::floor(hi / period_));
    for (long long m = m0; m <= m1; ++m) {
      const double base = static_cast<double>(m) * period_;
      for (std::size_t i = 0; i < widths_.size(); ++i) {
        const double a = std::max(lo, base + offsets_[i]);
        const double b = std::min(hi, base + offsets_[i] + widths_[i]);
        if (b > a) acc[slot_[i]] += W(b) - W(a);
      }
    }
    std::vector<double> out;
    for (auto& s : acc) out.push_back(s.value());
    return out;
  }

 private:
  std::size_t segment(double r, bool tie_lower) const {
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      const double end = offsets_[i] + widths_[i];
      if (tie_lower ? r <= end : r < end) return i;
    }
    return widths_.size() - 1;
  }

  // |{y in (-inf.., x] of segment i}| counted from 0: floor-periods plus the
  // part of the current period.
  double covered(double x, std::size_t i) const {
    const double m = std::floor(x / period_);
    const double r = x - m * period_;
    const double part = std::clamp(r - offsets_[i], 0.0, widths_[i]);
    return m * widths_[i] + part;
  }

  double period_;
  std::vector<double> widths_;
  std::vector<double> seg_slopes_;
  std::vector<double> offsets_;
  std::vector<double> partial_;
  std::vector<double> distinct_;
  std::vector<std::size_t> slot_;
  double increment_ = 0.0;
};

/// Cantor staircase profile on periods of length 1. Step i removes total
/// length q^i split evenly over the middles of the 2^{i-1} current segments,
/// q = (1 - lambda) / (2 - lambda), so the surviving set has measure lambda.
/// Slope `on_set` on the survivors of level `level`, `off_set` on removed
/// intervals. level < 0 is the limit set E, where the slope is taken as 0.
class CantorProfile final : public Profile {
 public:
  static constexpr int kLimitDepth = 60;

  CantorProfile(double lambda, int level, double on_set, double off_set)
      : lambda_(lambda), level_(level), on_(level < 0 ? 0.0 : on_set), off_(off_set) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorCode::ParamOutOfRange, "cantor: lambda must lie in (0, 1)");
    if (!(on_ >= 0.0) || !(off_ >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "cantor: slopes must be nonnegative");
    q_ = (1.0 - lambda) / (2.0 - lambda);
    const int depth = level < 0 ? kLimitDepth : level;
    measure_.push_back(1.0);
    seg_.push_back(1.0);
    gap_.push_back(0.0);
    double qi = 1.0;
    for (int i = 1; i <= depth; ++i) {
      qi *= q_;
      measure_.push_back(measure_.back() - qi);
      gap_.push_back(qi / std::ldexp(1.0, i - 1));
      seg_.push_back(measure_.back() / std::ldexp(1.0, i));
    }
    set_measure_ = level < 0 ? lambda : measure_.back();
  }

  double removal_ratio() const noexcept { return q_; }
  int level() const noexcept { return level_; }
  /// |E_level| (lambda for the limit).
  double set_measure() const noexcept { return set_measure_; }
  /// |E_i| from the removal bookkeeping.
  double level_measure(int i) const { return measure_.at(static_cast<std::size_t>(i)); }
  /// psi(1) - psi(0).
  double increment() const noexcept { return on_ * set_measure_ + off_ * (1.0 - set_measure_); }

  /// |E_level intersect [0, r]| for r in [0, 1].
  double set_cdf(double r) const {
    const int depth = static_cast<int>(seg_.size()) - 1;
    double pos = r;
    double acc = 0.0;
    for (int i = 1; i <= depth; ++i) {
      const double child = set_measure_ / std::ldexp(1.0, i);
      if (pos < seg_[static_cast<std::size_t>(i)]) continue;
      if (pos < seg_[static_cast<std::size_t>(i)] + gap_[static_cast<std::size_t>(i)]) return acc + child;
      acc += child;
      pos -= seg_[static_cast<std::size_t>(i)] + gap_[static_cast<std::size_t>(i)];
    }
    const double last = seg_.back();
    const double frac = last > 0.0 ? std::clamp(pos / last, 0.0, 1.0) : 0.0;
    return acc + frac * set_measure_ / std::ldexp(1.0, depth);
  }

  /// True when r in [0, 1] lies on the surviving set; a point on the
  /// boundary of a removed interval counts as surviving.
  bool on_set(double r) const {
    const int depth = static_cast<int>(seg_.size()) - 1;
    double pos = r;
    for (int i = 1; i <= depth; ++i) {
      const double s = seg_[static_cast<std::size_t>(i)];
      const double g = gap_[static_cast<std::size_t>(i)];
      if (pos <= s) continue;
      if (pos <= s + g) return false;
      pos -= s + g;
    }
    return true;
  }

  double value(double x) const override {
    const double m = std::floor(x);
    const double r = x - m;
    const double F = set_cdf(r);
    return m * increment() + on_ * F + off_ * (r - F);
  }

  double slope(double x) const override {
    const double r = x - std::floor(x);
    return on_set(r) ? on_ : off_;
  }

  std::vector<double> slopes() const override {
    if (on_ == off_) return {on_};
    return {on_, off_};
  }

  std::vector<double> lengths(double lo, double hi) const override {
    auto survivors = [&](double x) {
      const double m = std::floor(x);
      return m * set_measure_ + set_cdf(x - m);
    };
    const double s = survivors(hi) - survivors(lo);
    if (on_ == off_) return {hi - lo};
    return {s, (hi - lo) - s};
  }

  std::vector<double> integrals(double lo, double hi, const AxisPrimitive& W) const override {
    // Survivors at a finite enumeration level; the limit set uses the level
    // where |E_L| - lambda drops below 1e-14 (capped at 22).
    int depth = level_;
    if (level_ < 0) {
      depth = 1;
      while (depth < 22 && measure_[static_cast<std::size_t>(depth)] - lambda_ > 1e-14) ++depth;
    }
    std::vector<double> starts{0.0};
    for (int i = 1; i <= depth; ++i) {
      std::vector<double> next;
      next.reserve(starts.size() * 2);
      const double s = seg_[static_cast<std::size_t>(i)];
      const double g = gap_[static_cast<std::size_t>(i)];
      for (double a : starts) {
        next.push_back(a);
        next.push_back(a + s + g);
      }
      starts.swap(next);
    }
    const double len = seg_[static_cast<std::size_t>(depth)];
    CompensatedSum on_acc;
    const auto m0 = static_cast<long long>(std::floor(lo));
    const auto m1 = static_cast<long long>(std::floor(hi));
    for (long long m = m0; m <= m1; ++m) {
      const double base = static_cast<double>(m);
      if (base + 1.0 <= lo || base >= hi) continue;
      for (double a0 : starts) {
        const double a = std::max(lo, base + a0);
        const double b = std::min(hi, base + a0 + len);
        if (b > a) on_acc += W(b) - W(a);
      }
    }
    const double total = W(hi) - W(lo);
    if (on_ == off_) return {total};
    return {on_acc.value(), total - on_acc.value()};
  }

  double lipschitz() const override { return std::max(on_, off_); }

 private:
  double lambda_;
  int level_;
  double on_;
  double off_;
  double q_ = 0.0;
  double set_measure_ = 0.0;
  std::vector<double> measure_;
  std::vector<double> seg_;
  std::vector<double> gap_;
};

/// Affine map x -> A x + b.
struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  static AffineMap identity(int n) { return {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)}; }
  static AffineMap diagonal(const std::vector<double>& d) {
    const int n = static_cast<int>(d.size());
    AffineMap m = identity(n);
    for (int i = 0; i < n; ++i) m.A(i, i) = d[static_cast<std::size_t>(i)];
    return m;
  }
};

/// Set where f' equals `jacobian` (row-major n x n) and its weighted measure.
struct Phase {
  std::vector<double> jacobian;
  double measure = 0.0;
};

/// Mapping of a box in R^n with a uniform cell grid. Analytic sources are
/// slab partitions with per-slab affine maps or axis profiles; sampled
/// sources carry n-vectors at the grid nodes (row-major, last axis fastest).
class GridMapping {
 public:
  enum class Source { slabs, profile, sampled };

  static GridMapping slabs(Box box, std::vector<int> res, int axis, std::vector<double> cuts,
                           std::vector<AffineMap> maps) {
    GridMapping g(std::move(box), std::move(res), Source::slabs);
    g.axis_ = axis;
    g.cuts_ = std::move(cuts);
    g.maps_ = std::make_shared<std::vector<AffineMap>>(std::move(maps));
    g.validate_slabs();
    return g;
  }

  static GridMapping affine(Box box, std::vector<int> res, AffineMap map) {
    const int n = box.dim();
    const double lo = box.lo[static_cast<std::size_t>(n - 1)];
    const double hi = box.hi[static_cast<std::size_t>(n - 1)];
    return slabs(std::move(box), std::move(res), n - 1, {lo, hi}, {std::move(map)});
  }

  static GridMapping profile(Box box, std::vector<int> res, int axis, std::shared_ptr<const Profile> psi,
                             double scale = 1.0) {
    GridMapping g(std::move(box), std::move(res), Source::profile);
    if (axis < 0 || axis >= g.dim()) throw Error(ErrorCode::InvalidInput, "profile axis out of range");
    if (!(scale > 0.0)) throw Error(ErrorCode::InvalidInput, "profile scale must be positive");
    g.axis_ = axis;
    g.profile_ = std::move(psi);
    g.scale_ = scale;
    return g;
  }

  static GridMapping sampled(Box box, std::vector<int> res, std::vector<double> nodes) {
    GridMapping g(std::move(box), std::move(res), Source::sampled);
    if (nodes.size() != g.node_count() * static_cast<std::size_t>(g.dim())) {
      throw Error(ErrorCode::InvalidInput, "sampled mapping: expected " +
                                               std::to_string(g.node_count() * static_cast<std::size_t>(g.dim())) +
                                               " node values, got " + std::to_string(nodes.size()));
    }
    g.nodes_ = std::make_shared<const std::vector<double>>(std::move(nodes));
    return g;
  }

  int dim() const noexcept { return box_.dim(); }
  const Box& box() const noexcept { return box_; }
  const std::vector<int>& resolution() const noexcept { return res_; }
  Source source() const noexcept { return source_; }
  bool analytic() const noexcept { return source_ != Source::sampled; }
  int axis() const noexcept { return axis_; }
  const std::vector<double>& cuts() const noexcept { return cuts_; }
  const std::vector<AffineMap>& maps() const { return *maps_; }
  const std::shared_ptr<const Profile>& profile_ptr() const noexcept { return profile_; }
  double scale() const noexcept { return scale_; }
  const std::vector<double>& nodes() const { return *nodes_; }

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int r : res_) c *= static_cast<std::size_t>(r);
    return c;
  }
  std::size_t node_count() const {
    std::size_t c = 1;
    for (int r : res_) c *= static_cast<std::size_t>(r) + 1;
    return c;
  }
  double cell_size(int axis) const { return box_.side(axis) / res_[static_cast<std::size_t>(axis)]; }
  double cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= cell_size(i);
    return v;
  }

  /// Multi-index of a flat cell index (last axis fastest).
  std::vector<int> cell_index(std::size_t flat) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int i = dim() - 1; i >= 0; --i) {
      const auto r = static_cast<std::size_t>(res_[static_cast<std::size_t>(i)]);
      idx[static_cast<std::size_t>(i)] = static_cast<int>(flat % r);
      flat /= r;
    }
    return idx;
  }
  std::size_t cell_flat(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (int i = 0; i < dim(); ++i) {
      flat = flat * static_cast<std::size_t>(res_[static_cast<std::size_t>(i)]) +
             static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
    }
    return flat;
  }
  std::vector<double> cell_center(std::size_t flat) const {
    const auto idx = cell_index(flat);
    std::vector<double> c(static_cast<std::size_t>(dim()));
    for (int i = 0; i < dim(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      c[k] = box_.lo[k] + box_.side(i) * ((idx[k] + 0.5) / res_[k]);
    }
    return c;
  }
  Box cell_box(std::size_t flat) const {
    const auto idx = cell_index(flat);
    Box b = box_;
    for (int i = 0; i < dim(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      b.lo[k] = box_.lo[k] + box_.side(i) * (static_cast<double>(idx[k]) / res_[k]);
      b.hi[k] = box_.lo[k] + box_.side(i) * (static_cast<double>(idx[k] + 1) / res_[k]);
    }
    return b;
  }
  std::vector<double> node_point(const std::vector<int>& idx) const {
    std::vector<double> x(static_cast<std::size_t>(dim()));
    for (int i = 0; i < dim(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      x[k] = box_.lo[k] + box_.side(i) * (static_cast<double>(idx[k]) / res_[k]);
    }
    return x;
  }
  std::size_t node_flat(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (int i = 0; i < dim(); ++i) {
      flat = flat * (static_cast<std::size_t>(res_[static_cast<std::size_t>(i)]) + 1) +
             static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
    }
    return flat;
  }
  std::vector<int> node_index(std::size_t flat) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int i = dim() - 1; i >= 0; --i) {
      const auto r = static_cast<std::size_t>(res_[static_cast<std::size_t>(i)]) + 1;
      idx[static_cast<std::size_t>(i)] = static_cast<int>(flat % r);
      flat /= r;
    }
    return idx;
  }

  /// f(x). Sampled sources interpolate multilinearly.
  std::vector<double> operator()(const std::vector<double>& x) const {
    switch (source_) {
      case Source::slabs: {
        const AffineMap& m = (*maps_)[slab_of(x[static_cast<std::size_t>(axis_)])];
        Eigen::VectorXd v = m.A * Eigen::Map<const Eigen::VectorXd>(x.data(), dim()) + m.b;
        return {v.data(), v.data() + v.size()};
      }
      case Source::profile: {
        std::vector<double> y = x;
        y[static_cast<std::size_t>(axis_)] = profile_->value(x[static_cast<std::size_t>(axis_)]);
        if (scale_ != 1.0) {
          for (double& v : y) v *= scale_;
        }
        return y;
      }
      case Source::sampled: return interpolate(x);
    }
    return x;
  }

  /// Index of the slab containing coordinate s on the slab axis; a point on
  /// an interface belongs to the lower slab.
  std::size_t slab_of(double s) const {
    auto it = std::lower_bound(cuts_.begin() + 1, cuts_.end() - 1, s);
    return static_cast<std::size_t>(it - (cuts_.begin() + 1));
  }

  /// Analytic derivative at x (row-major n x n).
  std::vector<double> derivative_at(const std::vector<double>& x) const {
    const int n = dim();
    std::vector<double> jac(static_cast<std::size_t>(n * n), 0.0);
    if (source_ == Source::slabs) {
      const AffineMap& m = (*maps_)[slab_of(x[static_cast<std::size_t>(axis_)])];
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) jac[static_cast<std::size_t>(r * n + c)] = m.A(r, c);
      }
    } else if (source_ == Source::profile) {
      for (int i = 0; i < n; ++i) jac[static_cast<std::size_t>(i * n + i)] = scale_;
      jac[static_cast<std::size_t>(axis_ * n + axis_)] = scale_ * profile_->slope(x[static_cast<std::size_t>(axis_)]);
    } else {
      throw Error(ErrorCode::InvalidInput, "derivative_at needs an analytic source");
    }
    return jac;
  }

  /// Same mapping with a different cell grid.
  GridMapping with_resolution(std::vector<int> res) const {
    GridMapping g = *this;
    if (source_ == Source::sampled) throw Error(ErrorCode::InvalidInput, "cannot regrid a sampled mapping");
    g.res_ = std::move(res);
    g.check_grid();
    return g;
  }

  /// c * f.
  GridMapping scaled(double c) const {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidInput, "scale must be positive");
    GridMapping g = *this;
    switch (source_) {
      case Source::slabs: {
        auto maps = std::make_shared<std::vector<AffineMap>>(*maps_);
        for (auto& m : *maps) {
          m.A *= c;
          m.b *= c;
        }
        g.maps_ = std::move(maps);
        break;
      }
      case Source::profile: g.scale_ *= c; break;
      case Source::sampled: {
        std::vector<double> v = *nodes_;
        for (double& e : v) e *= c;
        g.nodes_ = std::make_shared<const std::vector<double>>(std::move(v));
        break;
      }
    }
    return g;
  }

  /// Node samples of an analytic mapping at its resolution.
  GridMapping sample() const {
    if (source_ == Source::sampled) return *this;
    const std::size_t count = node_count();
    const auto n = static_cast<std::size_t>(dim());
    std::vector<double> nodes(count * n);
    parallel_for(count, [&](std::size_t k) {
      const auto y = (*this)(node_point(node_index(k)));
      std::copy(y.begin(), y.end(), nodes.begin() + static_cast<std::ptrdiff_t>(k * n));
    });
    return sampled(box_, res_, std::move(nodes));
  }

  /// Exact decomposition of region into sets of constant derivative, with
  /// measures weighted by w. Analytic sources only.
  std::vector<Phase> phases(const Box& region, const Weight& w = Weight::unit()) const {
    if (!analytic()) throw Error(ErrorCode::InvalidInput, "phases need an analytic source");
    if (!box_.contains(region)) throw Error(ErrorCode::CubeOutOfDomain, "region leaves the mapping box");
    const int n = dim();
    const AxisPrimitive W(region, axis_, w);
    const double lo = region.lo[static_cast<std::size_t>(axis_)];
    const double hi = region.hi[static_cast<std::size_t>(axis_)];
    std::vector<Phase> out;
    if (source_ == Source::slabs) {
      for (std::size_t k = 0; k + 1 < cuts_.size(); ++k) {
        const double a = std::max(lo, cuts_[k]);
        const double b = std::min(hi, cuts_[k + 1]);
        if (!(b > a)) continue;
        Phase ph;
        ph.jacobian.resize(static_cast<std::size_t>(n * n));
        const AffineMap& m = (*maps_)[k];
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < n; ++c) ph.jacobian[static_cast<std::size_t>(r * n + c)] = m.A(r, c);
        }
        ph.measure = W(b) - W(a);
        out.push_back(std::move(ph));
      }
      return out;
    }
    const auto slopes = profile_->slopes();
    const std::vector<double> meas =
        W.unit() ? profile_->lengths(lo, hi) : profile_->integrals(lo, hi, W);
    for (std::size_t k = 0; k < slopes.size(); ++k) {
      Phase ph;
      ph.jacobian.assign(static_cast<std::size_t>(n * n), 0.0);
      for (int i = 0; i < n; ++i) ph.jacobian[static_cast<std::size_t>(i * n + i)] = scale_;
      ph.jacobian[static_cast<std::size_t>(axis_ * n + axis_)] = scale_ * slopes[k];
      ph.measure = W.unit() ? meas[k] * W.cross_section() : meas[k];
      out.push_back(std::move(ph));
    }
    return out;
  }

 private:
  GridMapping(Box box, std::vector<int> res, Source s) : box_(std::move(box)), res_(std::move(res)), source_(s) {
    box_.validate("grid");
    check_grid();
  }

  void check_grid() const {
    if (res_.size() != box_.lo.size()) throw Error(ErrorCode::InvalidInput, "grid: resolution rank differs from box rank");
    for (int r : res_) {
      if (r < 2) throw Error(ErrorCode::InvalidInput, "grid: resolution must be >= 2 per axis");
    }
  }

  void validate_slabs() const {
    const int n = dim();
    if (axis_ < 0 || axis_ >= n) throw Error(ErrorCode::InvalidInput, "slabs: axis out of range");
    if (cuts_.size() < 2 || cuts_.size() != maps_->size() + 1) {
      throw Error(ErrorCode::InvalidInput, "slabs: need one affine map per slab");
    }
    const auto ax = static_cast<std::size_t>(axis_);
    if (cuts_.front() != box_.lo[ax] || cuts_.back() != box_.hi[ax]) {
      throw Error(ErrorCode::InvalidInput, "slabs: cuts must start and end on the box faces");
    }
    for (std::size_t k = 0; k + 1 < cuts_.size(); ++k) {
      if (!(cuts_[k + 1] > cuts_[k])) throw Error(ErrorCode::InvalidInput, "slabs: cuts must increase");
    }
    for (const AffineMap& m : *maps_) {
      if (m.A.rows() != n || m.A.cols() != n || m.b.size() != n) {
        throw Error(ErrorCode::InvalidInput, "slabs: affine map has the wrong shape");
      }
    }
    // Gluing: neighbouring maps agree on the corners of the shared face.
    const std::size_t corners = std::size_t{1} << (n - 1);
    for (std::size_t k = 1; k + 1 < cuts_.size(); ++k) {
      for (std::size_t mask = 0; mask < corners; ++mask) {
        Eigen::VectorXd x(n);
        std::size_t bit = 0;
        for (int i = 0; i < n; ++i) {
          if (i == axis_) {
            x(i) = cuts_[k];
            continue;
          }
          x(i) = ((mask >> bit) & 1u) ? box_.hi[static_cast<std::size_t>(i)] : box_.lo[static_cast<std::size_t>(i)];
          ++bit;
        }
        const Eigen::VectorXd ya = (*maps_)[k - 1].A * x + (*maps_)[k - 1].b;
        const Eigen::VectorXd yb = (*maps_)[k].A * x + (*maps_)[k].b;
        const double scale = std::max(1.0, ya.cwiseAbs().maxCoeff());
        if ((ya - yb).cwiseAbs().maxCoeff() > 1e-12 * scale) {
          throw Error(ErrorCode::InvalidInput, "slabs: maps " + std::to_string(k - 1) + " and " + std::to_string(k) +
                                                   " disagree on their shared face");
        }
      }
    }
  }

  std::vector<double> interpolate(const std::vector<double>& x) const {
    const int n = dim();
    std::vector<int> base(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double u = (x[k] - box_.lo[k]) / box_.side(i) * res_[k];
      int b = static_cast<int>(std::floor(u));
      b = std::clamp(b, 0, res_[k] - 1);
      base[k] = b;
      frac[k] = u - b;
    }
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      double wt = 1.0;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const bool up = (mask >> i) & 1u;
        idx[k] = base[k] + (up ? 1 : 0);
        wt *= up ? frac[k] : 1.0 - frac[k];
      }
      if (wt == 0.0) continue;
      const std::size_t off = node_flat(idx) * static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += wt * (*nodes_)[off + static_cast<std::size_t>(i)];
    }
    return y;
  }

  Box box_;
  std::vector<int> res_;
  Source source_;
  int axis_ = 0;
  std::vector<double> cuts_;
  std::shared_ptr<std::vector<AffineMap>> maps_;
  std::shared_ptr<const Profile> profile_;
  double scale_ = 1.0;
  std::shared_ptr<const std::vector<double>> nodes_;
};

/// Pointwise distortion data of one derivative matrix.
struct Dilatation {
  double op_norm = 0.0;
  double J = 0.0;
  double K = 1.0;
  double P = 1.0;
};

/// Largest singular value: closed form for diagonal matrices, otherwise
/// power iteration on A^T A with an Eigen SVD fallback.
inline double operator_norm(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  bool diagonal = A.rows() == A.cols();
  for (Eigen::Index r = 0; r < n && diagonal; ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (r != c && A(r, c) != 0.0) {
        diagonal = false;
        break;
      }
    }
  }
  if (diagonal) return A.diagonal().cwiseAbs().maxCoeff();
  const Eigen::MatrixXd B = A.transpose() * A;
  if (B.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Eigen::VectorXd v(B.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 / std::sqrt(static_cast<double>(i) + 1.0);
  v.normalize();
  double rho = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = B * v;
    const double nw = w.norm();
    if (nw == 0.0) break;
    rho = v.dot(w);
    if ((w - rho * v).norm() <= 1e-12 * nw) return std::sqrt(std::max(rho, 0.0));
    v = w / nw;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

/// K = |f'|^n / |J| (1 if f' = 0, inf if J = 0 != f') and P = K^{1/(n-1)}.
inline Dilatation outer_dilatation(const Eigen::MatrixXd& A) {
  const auto n = static_cast<int>(A.rows());
  Dilatation d;
  d.op_norm = operator_norm(A);
  bool diagonal = true;
  for (int r = 0; r < n && diagonal; ++r) {
    for (int c = 0; c < n; ++c) {
      if (r != c && A(r, c) != 0.0) {
        diagonal = false;
        break;
      }
    }
  }
  d.J = diagonal ? A.diagonal().prod() : A.determinant();
  if (d.op_norm == 0.0) {
    d.K = 1.0;
  } else if (d.J == 0.0) {
    d.K = kInf;
  } else {
    // Hadamard's inequality gives K >= 1; clamp rounding below it.
    d.K = std::max(1.0, std::pow(d.op_norm, n) / std::abs(d.J));
  }
  if (d.K == kInf) {
    d.P = kInf;
  } else if (n == 2) {
    d.P = d.K;
  } else if (n == 3) {
    d.P = std::sqrt(d.K);
  } else {
    d.P = std::pow(d.K, 1.0 / (n - 1));
  }
  return d;
}

inline Dilatation outer_dilatation(const std::vector<double>& jac, int n) {
  return outer_dilatation(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      jac.data(), n, n));
}

namespace detail {

/// Centres (mean of the corner nodes) of every cell of a sampled mapping.
inline std::vector<double> sampled_centres(const GridMapping& m) {
  const int n = m.dim();
  const std::size_t cells = m.cell_count();
  std::vector<double> out(cells * static_cast<std::size_t>(n), 0.0);
  const double inv = 1.0 / static_cast<double>(std::size_t{1} << n);
  parallel_for(cells, [&](std::size_t c) {
    const auto idx = m.cell_index(c);
    std::vector<int> corner(idx.size());
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      for (int i = 0; i < n; ++i) corner[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)] + ((mask >> i) & 1u);
      const std::size_t off = m.node_flat(corner) * static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i) {
        out[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] += m.nodes()[off + static_cast<std::size_t>(i)];
      }
    }
    for (int i = 0; i < n; ++i) out[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] *= inv;
  });
  return out;
}

inline bool is_boundary_cell(const GridMapping& m, const std::vector<int>& idx) {
  for (int i = 0; i < m.dim(); ++i) {
    const int k = idx[static_cast<std::size_t>(i)];
    if (k == 0 || k == m.resolution()[static_cast<std::size_t>(i)] - 1) return true;
  }
  return false;
}

/// Column k of f' at a cell from neighbouring cell centres (step = one cell).
/// One-sided at the grid boundary.
inline void stencil_jacobian(const GridMapping& m, const std::vector<double>& centres, std::size_t cell,
                             std::vector<double>& jac) {
  const int n = m.dim();
  const auto idx = m.cell_index(cell);
  jac.assign(static_cast<std::size_t>(n * n), 0.0);
  for (int k = 0; k < n; ++k) {
    const int i = idx[static_cast<std::size_t>(k)];
    const int r = m.resolution()[static_cast<std::size_t>(k)];
    auto neighbour = [&](int di) {
      std::vector<int> j = idx;
      j[static_cast<std::size_t>(k)] = i + di;
      return m.cell_flat(j);
    };
    std::size_t a = cell, b = cell;
    double span = m.cell_size(k);
    if (i > 0 && i < r - 1) {
      a = neighbour(-1);
      b = neighbour(+1);
      span *= 2.0;
    } else if (i == 0) {
      b = neighbour(+1);
    } else {
      a = neighbour(-1);
    }
    for (int row = 0; row < n; ++row) {
      const double fb = centres[b * static_cast<std::size_t>(n) + static_cast<std::size_t>(row)];
      const double fa = centres[a * static_cast<std::size_t>(n) + static_cast<std::size_t>(row)];
      jac[static_cast<std::size_t>(row * n + k)] = (fb - fa) / span;
    }
  }
}

}  // namespace detail

/// f' at a cell: the affine derivative of the piece containing the cell
/// centre (analytic), or central differences across the neighbouring cells
/// (sampled; BoundaryCell on the outer layer).
inline std::vector<double> jacobian(const GridMapping& m, std::size_t cell) {
  if (cell >= m.cell_count()) throw Error(ErrorCode::InvalidInput, "cell index out of range");
  if (m.analytic()) return m.derivative_at(m.cell_center(cell));
  const auto idx = m.cell_index(cell);
  if (detail::is_boundary_cell(m, idx)) {
    throw Error(ErrorCode::BoundaryCell, "cell " + std::to_string(cell) + " touches the grid boundary");
  }
  const int n = m.dim();
  // Only the 2n neighbouring centres are filled.
  std::vector<double> centres(m.cell_count() * static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    for (int d : {-1, 1}) {
      std::vector<int> j = idx;
      j[static_cast<std::size_t>(k)] += d;
      const std::size_t c = m.cell_flat(j);
      std::vector<int> corner(j.size());
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        for (int i = 0; i < n; ++i) corner[static_cast<std::size_t>(i)] = j[static_cast<std::size_t>(i)] + ((mask >> i) & 1u);
        const std::size_t off = m.node_flat(corner) * static_cast<std::size_t>(n);
        for (int i = 0; i < n; ++i) {
          centres[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] +=
              m.nodes()[off + static_cast<std::size_t>(i)] / static_cast<double>(std::size_t{1} << n);
        }
      }
    }
  }
  std::vector<double> jac;
  detail::stencil_jacobian(m, centres, cell, jac);
  return jac;
}

/// Per-cell f', J, |f'|, K and P over the grid of a mapping.
struct DilatationField {
  GridMapping source;
  std::vector<double> jac;
  std::vector<double> J;
  std::vector<double> op_norm;
  std::vector<double> K;
  std::vector<double> P;
  std::vector<std::uint8_t> boundary;
  std::size_t boundary_cells = 0;

  int dim() const { return source.dim(); }
  std::size_t size() const { return P.size(); }
  std::vector<double> jacobian_of(std::size_t cell) const {
    const auto nn = static_cast<std::size_t>(dim() * dim());
    return {jac.begin() + static_cast<std::ptrdiff_t>(cell * nn), jac.begin() + static_cast<std::ptrdiff_t>((cell + 1) * nn)};
  }
};

/// Deterministic: every cell is a pure function of the mapping.
inline DilatationField dilatation_field(const GridMapping& m) {
  const int n = m.dim();
  const auto nn = static_cast<std::size_t>(n * n);
  const std::size_t cells = m.cell_count();
  DilatationField f{m, std::vector<double>(cells * nn), std::vector<double>(cells), std::vector<double>(cells),
                    std::vector<double>(cells), std::vector<double>(cells), std::vector<std::uint8_t>(cells, 0), 0};
  std::vector<double> centres;
  if (!m.analytic()) centres = detail::sampled_centres(m);
  parallel_for(cells, [&](std::size_t c) {
    std::vector<double> jac;
    if (m.analytic()) {
      jac = m.derivative_at(m.cell_center(c));
    } else {
      detail::stencil_jacobian(m, centres, c, jac);
      if (detail::is_boundary_cell(m, m.cell_index(c))) f.boundary[c] = 1;
    }
    const Dilatation d = outer_dilatation(jac, n);
    std::copy(jac.begin(), jac.end(), f.jac.begin() + static_cast<std::ptrdiff_t>(c * nn));
    f.J[c] = d.J;
    f.op_norm[c] = d.op_norm;
    f.K[c] = d.K;
    f.P[c] = d.P;
  });
  f.boundary_cells = static_cast<std::size_t>(std::count(f.boundary.begin(), f.boundary.end(), 1));
  return f;
}

/// Weighted measures of the sets of constant f' in `region`: exact phases
/// for analytic sources, cells with centre in the region for sampled ones.
inline std::vector<Phase> measured_phases(const DilatationField& field, const Box& region,
                                          const Weight& w = Weight::unit()) {
  if (field.source.analytic()) return field.source.phases(region, w);
  std::vector<Phase> out;
  const double vol = field.source.cell_volume();
  for (std::size_t c = 0; c < field.size(); ++c) {
    const auto x = field.source.cell_center(c);
    if (!region.contains_point(x)) continue;
    out.push_back({field.jacobian_of(c), w(x) * vol});
  }
  return out;
}

struct HolderEstimate {
  double p = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// max_i ||d_i f||_p <= ||K_f||_gamma^{1/n} |f(C)|^{1/n} with
/// p = n / (1/gamma + 1) and |f(C)| = int |J_f|.
inline HolderEstimate holder_estimate(const GridMapping& m, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidInput, "gamma must be positive");
  const int n = m.dim();
  std::vector<Phase> phases;
  if (m.analytic()) {
    phases = m.phases(m.box());
  } else {
    const DilatationField f = dilatation_field(m);
    phases = measured_phases(f, m.box());
  }
  HolderEstimate h;
  h.p = n / (1.0 / gamma + 1.0);
  std::vector<CompensatedSum> cols(static_cast<std::size_t>(n));
  CompensatedSum kg, vol;
  std::vector<std::size_t> infinite;
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Phase& ph = phases[k];
    if (ph.measure == 0.0) continue;
    const Dilatation d = outer_dilatation(ph.jacobian, n);
    if (d.K == kInf) {
      infinite.push_back(k);
      continue;
    }
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += ph.jacobian[static_cast<std::size_t>(r * n + c)] * ph.jacobian[static_cast<std::size_t>(r * n + c)];
      cols[static_cast<std::size_t>(c)] += ph.measure * std::pow(std::sqrt(s), h.p);
    }
    kg += ph.measure * std::pow(d.K, gamma);
    vol += ph.measure * std::abs(d.J);
  }
  if (!infinite.empty()) {
    std::ostringstream os;
    os << "K = inf on " << infinite.size() << " set(s) of positive measure; first index " << infinite.front();
    throw Error(ErrorCode::InfiniteDilatation, os.str());
  }
  for (auto& c : cols) h.lhs = std::max(h.lhs, std::pow(c.value(), 1.0 / h.p));
  h.rhs = std::pow(std::pow(kg.value(), 1.0 / gamma), 1.0 / n) * std::pow(vol.value(), 1.0 / n);
  h.holds = h.lhs <= h.rhs * (1.0 + 1e-6);
  return h;
}

struct DiameterSample {
  Box cube;
  double diameter = 0.0;
  double integral = 0.0;
  double ratio = 0.0;
};

struct DiameterReport {
  std::vector<DiameterSample> samples;
  double max_ratio = 0.0;
  double min_ratio = kInf;
  double calderon = 0.0;
  bool bounded = false;
};

namespace detail {

inline double image_diameter(const GridMapping& m, const Box& C) {
  const int n = m.dim();
  if (m.source() == GridMapping::Source::profile) {
    // Separable monotone map: the image of a box is a box.
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double side = C.side(i);
      if (i == m.axis()) {
        side = m.profile_ptr()->value(C.hi[static_cast<std::size_t>(i)]) -
               m.profile_ptr()->value(C.lo[static_cast<std::size_t>(i)]);
      }
      s += side * side;
    }
    return m.scale() * std::sqrt(s);
  }
  std::vector<std::vector<double>> pts;
  if (m.source() == GridMapping::Source::slabs) {
    // Diameter of a union of convex images: attained at images of vertices
    // of the pieces C intersect slab.
    const auto ax = static_cast<std::size_t>(m.axis());
    std::vector<double> levels{C.lo[ax]};
    for (double c : m.cuts()) {
      if (c > C.lo[ax] && c < C.hi[ax]) levels.push_back(c);
    }
    levels.push_back(C.hi[ax]);
    for (std::size_t li = 0; li + 1 < levels.size(); ++li) {
      const AffineMap& am = m.maps()[m.slab_of(0.5 * (levels[li] + levels[li + 1]))];
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) {
          const bool up = (mask >> i) & 1u;
          if (i == m.axis()) {
            x(i) = up ? levels[li + 1] : levels[li];
          } else {
            x(i) = up ? C.hi[static_cast<std::size_t>(i)] : C.lo[static_cast<std::size_t>(i)];
          }
        }
        const Eigen::VectorXd y = am.A * x + am.b;
        pts.emplace_back(y.data(), y.data() + n);
      }
    }
  } else {
    // Images of the grid nodes inside C, thinned to at most ~16 per axis.
    std::vector<int> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n)), step(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double h = m.cell_size(i);
      lo[k] = static_cast<int>(std::ceil((C.lo[k] - m.box().lo[k]) / h - 1e-9));
      hi[k] = static_cast<int>(std::floor((C.hi[k] - m.box().lo[k]) / h + 1e-9));
      step[k] = std::max(1, (hi[k] - lo[k]) / 16);
    }
    std::vector<int> idx = lo;
    while (true) {
      const std::size_t off = m.node_flat(idx) * static_cast<std::size_t>(n);
      pts.emplace_back(m.nodes().begin() + static_cast<std::ptrdiff_t>(off),
                       m.nodes().begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(n)));
      int k = n - 1;
      while (k >= 0) {
        const auto kk = static_cast<std::size_t>(k);
        if (idx[kk] == hi[kk]) {
          idx[kk] = lo[kk];
          --k;
          continue;
        }
        idx[kk] = std::min(hi[kk], idx[kk] + step[kk]);
        break;
      }
      if (k < 0) break;
    }
  }
  double best = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = pts[a][static_cast<std::size_t>(i)] - pts[b][static_cast<std::size_t>(i)];
        s += d * d;
      }
      best = std::max(best, s);
    }
  }
  return std::sqrt(best);
}

}  // namespace detail

/// Ratios diam f(C) / [int_C g(|f'|)]^{1/n} over a cube family.
inline DiameterReport calderon_diameter_check(const GridMapping& m, const GrowthFunction& g, const std::vector<Box>& cubes) {
  const int n = m.dim();
  double t_star = 1.0;
  if (!(g(t_star) > 0.0)) {
    const double first = generalized_inverse(g, std::numeric_limits<double>::min());
    t_star = std::max(1.0, 2.0 * first);
  }
  DiameterReport rep;
  rep.calderon = calderon_integral(g, 1.0 / (n - 1), t_star);
  if (!std::isfinite(rep.calderon)) {
    throw Error(ErrorCode::PreconditionFailed, "Calderon integral of " + g.label() + " at 1/(n-1) diverges");
  }
  std::unique_ptr<DilatationField> field;
  if (!m.analytic()) field = std::make_unique<DilatationField>(dilatation_field(m));
  for (const Box& C : cubes) {
    if (!m.box().contains(C)) throw Error(ErrorCode::CubeOutOfDomain, "cube leaves the mapping box");
    const std::vector<Phase> phases = m.analytic() ? m.phases(C) : measured_phases(*field, C);
    CompensatedSum acc;
    for (const Phase& ph : phases) acc += weighted(g(operator_norm(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ph.jacobian.data(), n, n))), ph.measure);
    DiameterSample s{C, detail::image_diameter(m, C), acc.value(), 0.0};
    s.ratio = s.diameter / std::pow(s.integral, 1.0 / n);
    rep.max_ratio = std::max(rep.max_ratio, s.ratio);
    rep.min_ratio = std::min(rep.min_ratio, s.ratio);
    rep.samples.push_back(std::move(s));
  }
  rep.bounded = std::isfinite(rep.max_ratio);
  return rep;
}

}  // namespace distortion_lab
