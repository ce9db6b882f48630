#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <vector>

#include "distortion_lab/criteria.hpp"

using namespace distortion_lab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double> O3{0.0, 0.0, 0.0};
const double kEps0 = 0.25;

double log_inv(double r) { return std::log(1.0 / r); }

bool spans_three_decades(const ConditionReport& r) {
  if (r.evidence.size() < 4) return false;
  double lo = kInf, hi = 0.0;
  for (const auto& [s, v] : r.evidence) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi / lo >= 1e3;
}

}  // namespace

TEST_CASE("sphere rule integrates low moments exactly", "[criteria][sphere]") {
  for (int n : {2, 3, 4, 5}) {
    const SphereRule rule = sphere_rule(n);
    double w = 0.0, x1 = 0.0, x1sq = 0.0, xnsq = 0.0, x1x2 = 0.0, x1q = 0.0;
    for (std::size_t k = 0; k < rule.points.size(); ++k) {
      const auto& x = rule.points[k];
      const double s = rule.weights[k];
      double norm = 0.0;
      for (double c : x) norm += c * c;
      CHECK_THAT(norm, WithinAbs(1.0, 1e-14));
      w += s;
      x1 += s * x[0];
      x1sq += s * x[0] * x[0];
      xnsq += s * x.back() * x.back();
      x1x2 += s * x[0] * x[1];
      x1q += s * std::pow(x[0], 4);
    }
    const double tol = n <= 4 ? 1e-13 : 1e-11;
    CHECK_THAT(w, WithinAbs(1.0, 1e-12));
    CHECK_THAT(x1, WithinAbs(0.0, tol));
    CHECK_THAT(x1sq, WithinAbs(1.0 / n, tol));
    CHECK_THAT(xnsq, WithinAbs(1.0 / n, tol));
    CHECK_THAT(x1x2, WithinAbs(0.0, tol));
    CHECK_THAT(x1q, WithinAbs(3.0 / (n * (n + 2.0)), tol));
  }
}

TEST_CASE("sphere averages", "[criteria][sphere]") {
  const Dominant q = Dominant::radial(3, O3, RadialFunction::symbolic(1.0, 2.0, 1.0, 0.0));
  CHECK(sphere_average(q, O3, 0.3) == 1.0 + 2.0 * 0.3);
  CHECK(sphere_average(Dominant::constant(3, 4.0), {1, 2, 3}, 0.5) == 4.0);
  const Dominant m = Dominant::custom(3, [](const std::vector<double>& x) { return 1.0 + x[0] * x[0]; }, "1+x1^2");
  CHECK_THAT(sphere_average(m, O3, 1.0), WithinAbs(4.0 / 3.0, 1e-13));
  SECTION("off-centre radial dominants go through the quadrature") {
    const Dominant r2 = Dominant::radial(3, O3, RadialFunction::custom([](double r) { return 1.0 + r * r; }, "1+r^2"));
    // |x0 + r u|^2 averages to |x0|^2 + r^2.
    CHECK_THAT(sphere_average(r2, {0.1, 0.2, 0.0}, 0.5), WithinAbs(1.0 + 0.05 + 0.25, 1e-13));
  }
  SECTION("grid fields must contain the sphere") {
    ScalarGrid g{Box::unit(3), {4, 4, 4}, std::vector<double>(125, 2.0)};
    const Dominant f = Dominant::field(g, "two");
    CHECK_THAT(sphere_average(f, {0.5, 0.5, 0.5}, 0.4), WithinAbs(2.0, 1e-13));
    CHECK_THROWS_AS(sphere_average(f, {0.5, 0.5, 0.5}, 0.6), Error);
    try {
      sphere_average(f, {0.5, 0.5, 0.5}, 0.6);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SphereOutOfDomain);
    }
  }
}

TEST_CASE("ball averages", "[criteria]") {
  const auto eps = default_schedule(kEps0);
  SECTION("constant") {
    const auto r = ball_average_limsup(Dominant::constant(3, 5.0), O3, eps);
    for (const auto& [e, v] : r.evidence) CHECK(v == 5.0);
    CHECK(r.verdict == ConditionVerdict::holds);
    CHECK(spans_three_decades(r));
  }
  SECTION("log(1/r) averages to log(1/eps) + 1/n and is unbounded") {
    const Dominant q = Dominant::radial(3, O3, RadialFunction::log_power(1.0));
    const auto r = ball_average_limsup(q, O3, eps);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(log_inv(e) + 1.0 / 3.0, 1e-9));
    CHECK(r.verdict == ConditionVerdict::fails);
    CHECK(r.certified);
    // Numeric route: the same function as a closure.
    const Dominant c = Dominant::radial(3, O3, RadialFunction::custom(log_inv, "log"));
    CHECK(ball_average_limsup(c, O3, eps).verdict == ConditionVerdict::fails);
  }
  SECTION("2 + r averages to 2 + n eps / (n + 1)") {
    const Dominant q = Dominant::radial(3, O3, RadialFunction::symbolic(2.0, 1.0, 1.0, 0.0));
    const auto r = ball_average_limsup(q, O3, eps);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(2.0 + 0.75 * e, 1e-10));
    CHECK(r.verdict == ConditionVerdict::holds);
    const Dominant c = Dominant::custom(3, [](const std::vector<double>& x) { return 2.0 + std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }, "2+|x|");
    const auto rc = ball_average_limsup(c, O3, eps);
    CHECK_FALSE(rc.certified);
    CHECK(rc.verdict == ConditionVerdict::holds);
    for (const auto& [e, v] : rc.evidence) CHECK_THAT(v, WithinRel(2.0 + 0.75 * e, 1e-9));
  }
  CHECK_THROWS_AS(ball_average_limsup(Dominant::constant(3, 5.0), O3, {0.1, 0.05, 0.01}), Error);
  CHECK_THROWS_AS(ball_average_limsup(Dominant::constant(3, 0.5), O3, eps), Error);
}

TEST_CASE("divergence integral", "[criteria]") {
  const auto eps = default_schedule(kEps0);
  const double u0 = log_inv(kEps0);
  SECTION("q = 1: I = log(eps0 / eps)") {
    const auto r = divergence_integral(RadialFunction::constant(1.0), 3, kEps0);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(std::log(kEps0 / e), 1e-10));
    CHECK(r.verdict == ConditionVerdict::holds);
    CHECK(spans_three_decades(r));
    CHECK(divergence_integral(RadialFunction::custom([](double) { return 1.0; }, "one"), 3, kEps0).verdict ==
          ConditionVerdict::holds);
  }
  SECTION("q = log^2(1/r), n = 3: I = log(u / u0)") {
    const auto r = divergence_integral(RadialFunction::log_power(2.0), 3, kEps0);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(std::log(log_inv(e) / u0), 1e-10));
    CHECK(r.verdict == ConditionVerdict::holds);
    CHECK(r.certified);
  }
  SECTION("q = log^4(1/r), n = 3: I = 1/u0 - 1/u, bounded") {
    const auto r = divergence_integral(RadialFunction::log_power(4.0), 3, kEps0);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(1.0 / u0 - 1.0 / log_inv(e), 1e-10));
    CHECK(r.verdict == ConditionVerdict::fails);
    const auto c = divergence_integral(RadialFunction::custom([](double x) { return std::pow(log_inv(x), 4); }, "log4"), 3, kEps0);
    CHECK(c.verdict == ConditionVerdict::fails);
  }
  SECTION("the borderline closure is not guessed") {
    const auto c = divergence_integral(RadialFunction::custom([](double x) { return std::pow(log_inv(x), 2); }, "log2"), 3, kEps0);
    CHECK_FALSE(c.certified);
    CHECK(c.verdict != ConditionVerdict::fails);
  }
  SECTION("power-type q") {
    CHECK(divergence_integral(RadialFunction::symbolic(1.0, 1.0, -1.0, 0.0), 3, kEps0).verdict == ConditionVerdict::fails);
    CHECK(divergence_integral(RadialFunction::symbolic(1.0, 1.0, 0.5, 0.0), 3, kEps0).verdict == ConditionVerdict::holds);
    CHECK(divergence_integral(RadialFunction::log_power(3.0), 4, kEps0).verdict == ConditionVerdict::holds);
  }
  SECTION("I is nonincreasing in eps") {
    for (const auto& q : {RadialFunction::constant(1.0), RadialFunction::log_power(2.0), RadialFunction::log_power(4.0),
                          RadialFunction::symbolic(1.0, 1.0, -0.5, 1.0)}) {
      const auto r = divergence_integral(q, 3, kEps0);
      for (std::size_t i = 1; i < r.evidence.size(); ++i) CHECK(r.evidence[i].second >= r.evidence[i - 1].second);
    }
  }
  (void)eps;
}

TEST_CASE("ring condition", "[criteria]") {
  const double w = sphere_area(3);
  const RadialFunction psi = RadialFunction::symbolic(0.0, 1.0, -1.0, -1.0);  // 1 / (t log(1/t))
  const double u0 = log_inv(kEps0);
  SECTION("Q = 1 with psi = 1/(t log(1/t))") {
    const auto r = ring_condition(Dominant::constant(3, 1.0), O3, psi, {}, kEps0);
    for (const auto& [e, v] : r.evidence) {
      const double u = log_inv(e);
      const double I = std::log(u / u0);
      const double R = 0.5 * w * (1.0 / (u0 * u0) - 1.0 / (u * u));
      CHECK_THAT(v, WithinRel(R / (I * I * I), 1e-9));
    }
    CHECK(r.verdict == ConditionVerdict::holds);
    CHECK(spans_three_decades(r));
  }
  SECTION("psi = 1: annulus volume over (eps0 - eps)^3") {
    const auto r = ring_condition(Dominant::constant(3, 1.0), O3, RadialFunction::constant(1.0), {}, kEps0);
    for (const auto& [e, v] : r.evidence) {
      const double R = w * (std::pow(kEps0, 3) - std::pow(e, 3)) / 3.0;
      CHECK_THAT(v, WithinRel(R / std::pow(kEps0 - e, 3), 1e-10));
    }
    CHECK(r.verdict == ConditionVerdict::fails);
  }
  SECTION("Q = c scales the ratio") {
    const auto r = ring_condition(Dominant::constant(3, 7.0), O3, psi, {}, kEps0);
    CHECK(r.verdict == ConditionVerdict::holds);
  }
  CHECK_THROWS_AS(ring_condition(Dominant::constant(3, 1.0), O3, RadialFunction::constant(0.0), {}, kEps0), Error);
}

TEST_CASE("log-order condition", "[criteria]") {
  const double w = sphere_area(3);
  SECTION("Q = 1, n = 3") {
    const auto r = log_order_condition(Dominant::constant(3, 1.0), O3, {}, kEps0);
    for (const auto& [e, v] : r.evidence) CHECK_THAT(v, WithinRel(w * std::log(kEps0 / e) / std::pow(log_inv(e), 3), 1e-10));
    CHECK(r.verdict == ConditionVerdict::holds);
  }
  SECTION("Q = log^2(1/r), n = 3") {
    const Dominant q = Dominant::radial(3, O3, RadialFunction::log_power(2.0));
    const double u0 = log_inv(kEps0);
    const auto r = log_order_condition(q, O3, {}, kEps0);
    for (const auto& [e, v] : r.evidence) {
      const double u = log_inv(e);
      CHECK_THAT(v, WithinRel(w * (u * u * u - u0 * u0 * u0) / 3.0 / (u * u * u), 1e-10));
    }
    CHECK(r.verdict == ConditionVerdict::fails);
    const Dominant c = Dominant::radial(3, O3, RadialFunction::custom([](double x) { return std::pow(log_inv(x), 2); }, "log2"));
    CHECK(log_order_condition(c, O3, {}, kEps0).verdict == ConditionVerdict::fails);
  }
  SECTION("Q = 1, n = 4") {
    const std::vector<double> O4(4, 0.0);
    const auto r = log_order_condition(Dominant::constant(4, 1.0), O4, {}, kEps0);
    for (const auto& [e, v] : r.evidence) {
      CHECK_THAT(v, WithinRel(sphere_area(4) * std::log(kEps0 / e) / std::pow(log_inv(e), 4), 1e-10));
    }
    CHECK(r.verdict == ConditionVerdict::holds);
    const Dominant c = Dominant::custom(4, [](const std::vector<double>&) { return 1.0; }, "one");
    CHECK(log_order_condition(c, O4, {}, kEps0).verdict == ConditionVerdict::holds);
  }
}

TEST_CASE("radial and grid annulus integrals agree", "[criteria][grid][slow]") {
  const RadialFunction psi = RadialFunction::symbolic(0.0, 1.0, -1.0, -1.0);
  const Dominant q = Dominant::radial(3, O3, RadialFunction::symbolic(1.0, 1.0, 0.0, 1.0));  // 1 + log(1/r)
  const double inner = kEps0 / 4.0;
  const auto ring_g = [&](double r) { return std::pow(psi(r), 3); };
  const auto log_g = [](double r) { return 1.0 / (r * r * r); };
  for (const auto& g : {std::function<double(double)>(ring_g), std::function<double(double)>(log_g)}) {
    const double radial = annulus_integral(q, O3, g, inner, kEps0);
    const double grid = annulus_integral(q, O3, g, inner, kEps0, AnnulusMethod::grid, 128, 2);
    CHECK_THAT(grid, WithinRel(radial, 1e-3));
  }
}

TEST_CASE("phi divergence", "[criteria][phi]") {
  SECTION("e^t at exponent 2 diverges; partial integrals match 2(sqrt u - sqrt u0)") {
    const auto r = phi_divergence(GrowthFunction::exponential(1.0, 1.0, 1.0), 2.0, kE * kE);
    CHECK(r.direct.verdict == ConditionVerdict::holds);
    CHECK(r.log_form.verdict == ConditionVerdict::holds);
    CHECK(r.agree);
    for (const auto& [u, v] : r.direct.evidence) CHECK_THAT(v, WithinRel(2.0 * (std::sqrt(u) - std::sqrt(2.0)), 1e-8));
    for (const auto& [v, L] : r.log_form.evidence) {
      CHECK_THAT(L, WithinRel(2.0 * (std::exp(0.5 * v) - std::sqrt(2.0)), 1e-8));
    }
  }
  SECTION("t^p converges") {
    for (double p : {1.0, 2.0, 5.0}) {
      const auto r = phi_divergence(GrowthFunction::power(1.0, p), 2.0, 2.0);
      CHECK(r.direct.verdict == ConditionVerdict::fails);
      CHECK(r.log_form.verdict == ConditionVerdict::fails);
    }
  }
  SECTION("exp(t^{1/2}) at exponent 2: log form ~ dt / t") {
    const auto r = phi_divergence(GrowthFunction::exponential(1.0, 1.0, 0.5), 2.0, 3.0);
    CHECK(r.direct.verdict == ConditionVerdict::holds);
    CHECK(r.log_form.verdict == ConditionVerdict::holds);
    // Beyond t0 = log^2 3 the log form is log(T / t0).
    const double t0 = std::pow(std::log(3.0), 2);
    for (const auto& [v, L] : r.log_form.evidence) CHECK_THAT(L, WithinRel(v - std::log(t0), 1e-7));
  }
  SECTION("both forms agree on the symbolic family") {
    struct Case {
      GrowthFunction phi;
      bool diverges;
    };
    const std::vector<Case> family{
        {GrowthFunction::power(1.0, 2.0), false},
        {GrowthFunction::power(3.0, 4.0), false},
        {GrowthFunction::logpow(1.0, 2.0, 1.0), false},
        {GrowthFunction::exponential(1.0, 1.0, 1.0), true},
        {GrowthFunction::exponential(1.0, 1.0, 0.5), true},
        {GrowthFunction::exponential(1.0, 1.0, 1.0 / 3.0), false},
        {GrowthFunction::exponential(1.0, 2.0, 0.5, 1.0), true},
        {GrowthFunction::exponential(1.0, 1.0, 0.5, -1.0), true},
        {GrowthFunction::exponential(1.0, 1.0, 0.5, -2.0), false},
        {GrowthFunction::exponential(1.0, 1.0, 2.0), true},
        {GrowthFunction::linear(0.0, 1.0).with_domain_end(4.0), true},
    };
    for (const auto& c : family) {
      INFO(c.phi.label() << " tail " << static_cast<int>(c.phi.tail_model().kind));
      const auto r = phi_divergence(c.phi, 2.0, c.phi(1.0) + 1.0);
      CHECK(r.agree);
      CHECK((r.direct.verdict == ConditionVerdict::holds) == c.diverges);
      CHECK(r.direct.certified);
    }
  }
  SECTION("numeric evidence follows the certified verdicts") {
    const auto a = phi_divergence(GrowthFunction::exponential(1.0, 1.0, 1.0 / 3.0), 2.0, 3.0);
    CHECK(a.direct.evidence.back().second < 2.0 * a.direct.evidence[a.direct.evidence.size() / 2].second);
  }
  CHECK_THROWS_AS(phi_divergence(GrowthFunction::power(1.0, 2.0), 2.0, 1.0), Error);
  CHECK_THROWS_AS(phi_divergence(GrowthFunction::tabulated({0, 0, 1, 1, 2, 4}), 2.0, 2.0), Error);
}
