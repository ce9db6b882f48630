#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "distortion_lab/growth.hpp"
#include "distortion_lab/growth_json.hpp"

using namespace distortion_lab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GrowthFunction square() { return GrowthFunction::power(1.0, 2.0).with_label("t^2"); }

GrowthFunction kinked() {
  // slope 1 on [0, 1), slope 3 after
  return GrowthFunction({Piece{0.0, 1.0, PieceKind::linear, {0.0, 1.0}}, Piece{1.0, kInf, PieceKind::linear, {-2.0, 3.0}}},
                        "kink");
}

GrowthFunction with_jump() {
  // 2 on [2, 3), 5 from 3 on
  return GrowthFunction({Piece{0.0, 2.0, PieceKind::linear, {0.0, 1.0}}, Piece{2.0, 3.0, PieceKind::constant, {2.0}},
                         Piece{3.0, kInf, PieceKind::linear, {2.0, 1.0}}},
                        "jump");
}

std::vector<double> grid(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return out;
}

std::vector<GrowthFunction> convex_family() {
  return {square(),
          GrowthFunction::power(1.0, 4.0),
          GrowthFunction::power(2.0, 1.5),
          GrowthFunction::logpow(1.0, 1.0, 1.0),
          GrowthFunction::logpow(1.0, 2.0, 0.5),
          GrowthFunction::exponential(1.0, 1.0, 1.0),
          GrowthFunction::exponential(1.0, 1.0, 2.0).with_label("exp(t^2)"),
          kinked()};
}

}  // namespace

TEST_CASE("evaluate follows the extended-real conventions") {
  CHECK(square()(3.0) == 9.0);
  CHECK(square()(0.0) == 0.0);
  CHECK(square()(kInf) == kInf);
  const auto bounded = square().with_domain_end(2.0);
  CHECK(bounded(3.0) == kInf);
  CHECK(bounded(2.0) == kInf);
  CHECK(bounded(1.5) == 2.25);
  CHECK(bounded.with_value_at_domain_end(10.0)(2.0) == 10.0);
  CHECK_THROWS_AS(square()(-1.0), Error);
}

TEST_CASE("right derivative") {
  for (double p : {1.5, 2.0, 4.0}) {
    const auto g = GrowthFunction::power(1.0, p);
    for (double t : {0.5, 1.0, 7.0}) CHECK_THAT(right_derivative(g, t), WithinRel(p * std::pow(t, p - 1.0), 1e-14));
  }
  CHECK(right_derivative(kinked(), 1.0) == 3.0);
  CHECK(right_derivative(kinked(), 0.999) == 1.0);
  const double h = 1e-4;
  const double fd = (square()(2.0 + h) - square()(2.0 - h)) / (2.0 * h);
  CHECK_THAT(right_derivative(square(), 2.0), WithinAbs(fd, 1e-6));
  CHECK(right_derivative(square().with_domain_end(2.0), 2.0) == kInf);
  const auto concave = GrowthFunction::power(1.0, 0.5);
  CHECK_THROWS_AS(right_derivative(concave, 1.0), Error);
}

TEST_CASE("strict convexity") {
  CHECK(is_strictly_convex(square()).strictly_convex);
  const auto lin = is_strictly_convex(GrowthFunction::linear(0.0, 1.0));
  CHECK(lin.convex);
  CHECK_FALSE(lin.strictly_convex);
  const auto tlog = GrowthFunction::logpow(1.0, 1.0, 1.0);
  const auto ev = is_strictly_convex(tlog);
  CHECK(ev.strictly_convex);
  // slope log(e+t) + t/(e+t) increases over the recorded tail
  for (std::size_t i = 1; i < ev.tail_slope.size(); ++i) CHECK(ev.tail_slope[i] > ev.tail_slope[i - 1]);
  CHECK_FALSE(is_strictly_convex(GrowthFunction::power(1.0, 0.5)).convex);

  const auto opaque = GrowthFunction::custom([](double t) { return t; }, [](double) { return 1.0; },
                                             TailModel::unknown(), "opaque-linear");
  const auto op = is_strictly_convex(opaque);
  CHECK(op.convex);
  CHECK_FALSE(op.strictly_convex);
  CHECK(op.inconclusive);
}

TEST_CASE("Calderon integral closed forms") {
  const auto t4 = GrowthFunction::power(1.0, 4.0);
  CHECK_THAT(calderon_integral(t4, 0.4, 1.0), WithinAbs(5.0, 1e-6));
  // cross-check with direct quadrature over a long finite range plus tail
  auto f = [](double t) { return std::pow(t / std::pow(t, 4.0), 0.4); };
  const double head = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 1.0, 1e6, 20, 1e-13);
  CHECK_THAT(calderon_integral(t4, 0.4, 1.0), WithinAbs(head + std::pow(1e6, -0.2) / 0.2, 1e-8));
  CHECK(calderon_integral(GrowthFunction::linear(0.0, 1.0), 0.3, 1.0) == kInf);
  CHECK(calderon_integral(square(), 0.5, 4.0) == kInf);
  // shifted power tail goes through quadrature instead of the closed form
  const auto shifted = GrowthFunction::single(Piece{0.0, kInf, PieceKind::power, {1.0, 4.0}, 1.0, 0.0}, "t^4+1");
  auto g = [](double t) { return std::pow(t / (std::pow(t, 4.0) + 1.0), 0.4); };
  const double direct = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 1.0, 1e7, 25, 1e-13) +
                        std::pow(1e7, -0.2) / 0.2;
  CHECK_THAT(calderon_integral(shifted, 0.4, 1.0), WithinRel(direct, 1e-7));
  CHECK_THROWS_AS(calderon_integral(GrowthFunction::tabulated({0, 0, 1, 1, 2, 4}), 0.4, 1.0), Error);
  // borderline alpha (p - 1) = 1 with a log factor: converges iff alpha q > 1
  CHECK(std::isfinite(calderon_integral(GrowthFunction::logpow(1.0, 3.0, 3.0), 0.5, 2.0)));
  CHECK(calderon_integral(GrowthFunction::logpow(1.0, 3.0, 1.0), 0.5, 2.0) == kInf);
}

TEST_CASE("Calderon forms agree on finiteness") {
  for (const auto& g : convex_family()) {
    for (double alpha : {0.25, 0.5, 1.0}) {
      const double a = calderon_integral(g, alpha, 2.0);
      const double b = calderon_derivative_integral(g, alpha, 2.0);
      INFO(g.label() << " alpha=" << alpha);
      CHECK(std::isfinite(a) == std::isfinite(b));
    }
  }
}

TEST_CASE("decomposition of t^4") {
  const auto phi = GrowthFunction::power(1.0, 4.0);
  const auto d = decompose(phi, 0.4, 0.8);
  CHECK(d.lambda == 0.5);
  CHECK_THAT(d.T_star, WithinRel(std::cbrt(0.25), 1e-12));
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double t = 100.0 * i / 2000.0;
    const double lhs = d.psi(d.phi_tilde(t));
    worst = std::max(worst, std::abs(lhs - phi(t)) / std::max(1.0, phi(t)));
    CHECK(d.phi_tilde(t) <= phi(t) * (1.0 + 1e-12));
  }
  CHECK(worst <= 1e-8);
  // I = int_1^inf dt / (4 t^3)^0.4
  const double I = std::pow(4.0, -0.4) * 5.0;
  CHECK_THAT(d.I, WithinRel(I, 1e-10));
  CHECK_THAT(calderon_derivative_integral(d.phi_tilde, 0.8, d.t_star), WithinAbs(I, 1e-6));
  CHECK(std::isfinite(calderon_integral(d.phi_tilde, 0.8, d.t_star)));
}

TEST_CASE("decomposition psi matches direct quadrature of H") {
  const auto phi = GrowthFunction::power(1.0, 3.0).with_label("t^3");
  const auto d = decompose(phi, 0.6, 0.9);
  const double lam = d.lambda;
  // H(s) = phi'(phi_tilde^{-1}(s))^{1-lambda}; phi_tilde^{-1} by an independent bisection
  auto inv = [&](double s) {
    double lo = 0.0, hi = 1.0;
    while (d.phi_tilde(hi) < s) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (d.phi_tilde(mid) < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto H = [&](double s) { return std::pow(3.0 * std::pow(inv(s), 2.0), 1.0 - lam); };
  for (double s : {d.S_star * 1.5, d.S_star * 4.0, d.S_star * 30.0}) {
    const double psi_q = phi(0.0) + d.S_star +
                         boost::math::quadrature::gauss_kronrod<double, 31>::integrate(H, d.S_star, s, 12, 1e-11);
    CHECK_THAT(d.psi(s), WithinRel(psi_q, 1e-8));
  }
  CHECK_THROWS_AS(decompose(GrowthFunction::power(1.0, 2.0), 0.5, 0.9), Error);
  CHECK_THROWS_AS(decompose(GrowthFunction::constant(3.0), 0.1, 0.2), Error);
}

TEST_CASE("regularize") {
  const auto g = square();
  const auto r = regularize(g, 0.1);
  for (double t : grid(1e-3, 1e3, 50)) CHECK(r(t) == g(t));

  const auto plateau = GrowthFunction({Piece{0.0, 1.0, PieceKind::linear, {0.0, 1.0}}, Piece{1.0, 2.0, PieceKind::constant, {1.0}},
                                       Piece{2.0, kInf, PieceKind::linear, {-1.0, 1.0}}},
                                      "plateau");
  const auto rp = regularize(plateau, 0.1);
  CHECK_THAT(rp(1.5), WithinAbs(1.0 + 0.05 * 0.5, 1e-15));
  CHECK(rp(2.0) - plateau(2.0) <= 0.05 + 1e-15);
  double prev = -1.0;
  for (int i = 0; i <= 4000; ++i) {
    const double t = 4.0 * i / 4000.0;
    CHECK(rp(t) >= plateau(t));
    CHECK(rp(t) <= plateau(t) + 0.1);
    CHECK(rp(t) > prev);
    prev = rp(t);
  }
  // unbounded constancy interval stays within eps and strictly increases
  const auto flat_tail = GrowthFunction({Piece{0.0, 1.0, PieceKind::linear, {0.0, 1.0}}, Piece{1.0, kInf, PieceKind::constant, {1.0}}},
                                        "flat-tail");
  const auto rf = regularize(flat_tail, 0.2);
  CHECK(rf(10.0) < rf(20.0));
  CHECK(rf(1e6) <= 1.0 + 0.1);
  // flat tabulated segment
  const auto tab = GrowthFunction::tabulated({0, 0, 1, 1, 2, 1, 3, 4});
  const auto rt = regularize(tab, 0.1);
  CHECK(rt(1.5) > rt(1.25));
  CHECK_THAT(rt(2.0) - tab(2.0), WithinAbs(0.05, 1e-15));
}

TEST_CASE("truncate_below") {
  const auto t = truncate_below(square(), 2.0);
  CHECK(t(1.0) == 4.0);
  CHECK(t(3.0) == 9.0);
  CHECK(t(0.0) == 0.0);
  for (double x : grid(2.0, 1e4, 100)) CHECK(t(x) == square()(x));
  CHECK_THROWS_AS(truncate_below(GrowthFunction::linear(0.0, 0.0), 1.0), Error);
}

TEST_CASE("generalized inverse") {
  const auto g = square();
  CHECK_THAT(generalized_inverse(g, 4.0), WithinRel(2.0, 1e-14));
  const auto capped = GrowthFunction({Piece{0.0, 10.0, PieceKind::linear, {0.0, 1.0}}, Piece{10.0, kInf, PieceKind::constant, {10.0}}},
                                     "capped");
  CHECK(generalized_inverse(capped, 11.0) == kInf);
  CHECK(generalized_inverse(with_jump(), 4.0) == 3.0);
  // brute-force inf over a dense grid for the jump case
  double brute = kInf;
  for (int i = 0; i <= 600000; ++i) {
    const double t = 6.0 * i / 600000.0;
    if (with_jump()(t) >= 4.0) {
      brute = t;
      break;
    }
  }
  CHECK(brute == 3.0);
  CHECK(generalized_inverse(g, kInf) == kInf);
  CHECK(generalized_inverse(g.with_domain_end(5.0), 100.0) == 5.0);
  CHECK(generalized_inverse(g, -1.0) == 0.0);
}

TEST_CASE("Galois property of the inverse") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<GrowthFunction> family{square(), kinked(), with_jump(), GrowthFunction::exponential(1.0, 1.0, 1.0),
                                           GrowthFunction::logpow(1.0, 1.0, 1.0)};
  for (const auto& g : family) {
    for (int i = 0; i < 200; ++i) {
      const double t = std::pow(10.0, u(rng));
      const double gt = g(t);
      if (!std::isfinite(gt)) continue;
      CHECK(generalized_inverse(g, gt) <= t);
      const double tau = std::pow(10.0, u(rng));
      const double inv = generalized_inverse(g, tau);
      if (std::isfinite(inv)) CHECK(g(inv) >= tau * (1.0 - 1e-15));
    }
  }
  for (double t : grid(1e-3, 1e3, 200)) CHECK_THAT(generalized_inverse(square(), square()(t)), WithinRel(t, 1e-9));
}

TEST_CASE("convex minorant of t^2") {
  const auto g = square();
  const auto cm = convex_minorant_detail(g, 1.0);
  CHECK_THAT(cm.T_star, WithinRel(2.0, 1e-12));
  CHECK_THAT(cm.slope, WithinRel(4.0, 1e-12));
  CHECK_THAT(cm.minorant(2.0), WithinRel(4.0, 1e-12));
  CHECK_THAT(cm.minorant(1.5), WithinRel(2.0, 1e-12));
  CHECK(cm.minorant(0.5) == 0.0);
  for (double t : grid(1e-3, 1e4, 300)) {
    CHECK(cm.minorant(t) <= g(t) * (1.0 + 1e-12));
    if (t >= cm.T_star) CHECK(cm.minorant(t) == g(t));
  }
  CHECK(is_strictly_convex(cm.minorant).convex);
  CHECK_THROWS_AS(convex_minorant(GrowthFunction::linear(0.0, 1.0), 1.0), Error);
}

TEST_CASE("power transform") {
  const auto Phi = square();
  const auto phi = power_transform(Phi, 3, PowerDirection::to_lower);
  for (double t : grid(1e-2, 1e2, 60)) CHECK_THAT(phi(t), WithinRel(std::pow(t, 4.0), 1e-13));
  const auto back = power_transform(phi, 3, PowerDirection::to_upper);
  for (double t : grid(1e-2, 1e3, 60)) CHECK_THAT(back(t), WithinRel(Phi(t), 1e-10));
  for (int n : {2, 3, 4, 7}) {
    const auto g = GrowthFunction::exponential(1.0, 1.0, 0.5);
    const auto rt = power_transform(power_transform(g, n, PowerDirection::to_upper), n, PowerDirection::to_lower);
    for (double t : grid(1e-2, 1e2, 30)) CHECK_THAT(rt(t), WithinRel(g(t), 1e-10));
  }
  // (phi o h)^{-1} = h^{-1} o phi^{-1} with phi = t^4, h(t) = t^2 (n = 3)
  const auto t4 = GrowthFunction::power(1.0, 4.0);
  const auto comp = power_transform(t4, 3, PowerDirection::to_lower);
  CHECK_THAT(comp(2.0), WithinRel(256.0, 1e-14));
  CHECK_THAT(generalized_inverse(comp, 256.0), WithinRel(2.0, 1e-12));
  for (double tau : grid(1e-2, 1e6, 40)) {
    const double lhs = generalized_inverse(comp, tau);
    const double rhs = std::sqrt(generalized_inverse(t4, tau));
    CHECK_THAT(lhs, WithinRel(rhs, 1e-10));
  }
}

TEST_CASE("monotonicity and two-sided slope bound on the convex family") {
  for (const auto& g : convex_family()) {
    INFO(g.label());
    double prev = g(0.0);
    for (double t : grid(1e-4, 1e3, 400)) {
      const double v = g(t);
      CHECK(v >= prev);
      prev = v;
      const double mean = (v - g(0.0)) / t;
      if (!std::isfinite(mean)) continue;
      CHECK(0.5 * g.slope(0.5 * t) <= mean * (1.0 + 1e-12));
      CHECK(mean <= g.slope(t) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("growth DSL") {
  const auto j = json::parse(R"({"label": "sq", "pieces": [{"from": 0, "to": "inf", "kind": "power", "coeffs": [1, 2]}]})");
  const auto g = parse_growth(j);
  CHECK(g(3.0) == 9.0);
  CHECK(g.label() == "sq");
  const auto gap = json::parse(R"({"pieces": [{"from": 0, "to": 1, "kind": "linear", "coeffs": [0, 1]},
                                              {"from": 2, "to": "inf", "kind": "linear", "coeffs": [0, 1]}]})");
  try {
    parse_growth(gap);
    FAIL("expected a tiling error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("phi.pieces[0].to") != std::string::npos);
  }
  const auto down = json::parse(R"({"pieces": [{"from": 0, "to": "inf", "kind": "linear", "coeffs": [5, -1]}]})");
  CHECK_THROWS_AS(parse_growth(down), Error);
  auto allowed = down;
  allowed["pieces"][0]["to"] = 1;
  allowed["pieces"].push_back(json::parse(R"({"from": 1, "to": "inf", "kind": "linear", "coeffs": [3, 1]})"));
  allowed["monotone"] = false;
  CHECK(parse_growth(allowed)(1.0) == 4.0);
  const auto bad_kind = json::parse(R"({"pieces": [{"from": 0, "to": "inf", "kind": "cubic", "coeffs": [1]}]})");
  CHECK_THROWS_AS(parse_growth(bad_kind), Error);
  const auto jumpy = json::parse(R"({"pieces": [{"from": 0, "to": "inf", "kind": "linear", "coeffs": [0, 1]}],
                                     "T0": 2, "points": {"T0": 10}})");
  const auto lj = parse_growth(jumpy);
  CHECK(lj(2.0) == 10.0);
  CHECK(lj(2.5) == kInf);
  CHECK(lj.left_limit(2.0) == 2.0);
  const auto round = parse_growth(growth_to_json(lj));
  CHECK(round(1.0) == lj(1.0));
  CHECK(round(2.0) == 10.0);
}
