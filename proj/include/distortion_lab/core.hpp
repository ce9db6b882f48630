#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace distortion_lab {

/// Extended reals are plain doubles; +inf is the point at infinity of [0, inf].
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kE = 2.71828182845904523536;

enum class ErrorCode {
  NotConvex,
  PreconditionFailed,
  Inconclusive,
  NoTangent,
  BoundaryCell,
  InfiniteDilatation,
  CubeOutOfDomain,
  DominationFailed,
  ParamOutOfRange,
  SphereOutOfDomain,
  InvalidInput,
  Io,
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotConvex: return "NotConvex";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::NoTangent: return "NoTangent";
    case ErrorCode::BoundaryCell: return "BoundaryCell";
    case ErrorCode::InfiniteDilatation: return "InfiniteDilatation";
    case ErrorCode::CubeOutOfDomain: return "CubeOutOfDomain";
    case ErrorCode::DominationFailed: return "DominationFailed";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::SphereOutOfDomain: return "SphereOutOfDomain";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Product used in measure-weighted sums: inf * 0 = 0.
inline double weighted(double value, double measure) noexcept {
  if (measure == 0.0 || value == 0.0) return 0.0;
  return value * measure;
}

inline bool is_finite(double x) noexcept { return std::isfinite(x); }

/// Neumaier-compensated accumulator. Infinite terms saturate the sum.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) noexcept {
    if (!std::isfinite(x) || !std::isfinite(sum_)) {
      sum_ += x;
      return *this;
    }
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const noexcept {
    if (!std::isfinite(sum_)) return sum_;
    return sum_ + carry_;
  }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Worker cap from DISTORTION_LAB_THREADS (>= 1), else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("DISTORTION_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(i) for i in [0, count). Each index is visited exactly once, so
/// results written per index do not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(worker_count(), std::max<std::size_t>(count / 4096, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Surface area of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) {
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Geometric schedule start, start*ratio, ... (count values).
inline std::vector<double> geometric_schedule(double start, double ratio, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  double v = start;
  for (int i = 0; i < count; ++i) {
    out.push_back(v);
    v *= ratio;
  }
  return out;
}

/// Relative closeness with an absolute floor of 1.
inline bool close_rel(double a, double b, double tol) noexcept {
  if (a == b) return true;
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace distortion_lab
