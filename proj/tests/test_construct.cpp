#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "distortion_lab/construct.hpp"
#include "distortion_lab/functional.hpp"

using namespace distortion_lab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double P_of(const Phase& ph, int n) { return outer_dilatation(ph.jacobian, n).P; }

// phi(1.5) = 3, phi(2) = 1, increasing with slope 1 after 3.
GrowthFunction bump() {
  return GrowthFunction::tabulated({0.0, 0.0, 1.5, 3.0, 2.0, 1.0, 3.0, 2.0}).with_monotone(false).with_label("bump");
}

}  // namespace

TEST_CASE("affine stretch dilatations", "[construct]") {
  const auto P = [](double c, int n) { return dilatation_field(affine_stretch(c, n)).P; };
  for (double p : P(3.0, 3)) CHECK_THAT(p, WithinRel(3.0, 1e-15));
  for (double p : P(1.0, 3)) CHECK(p == 1.0);
  for (double p : P(0.25, 3)) CHECK_THAT(p, WithinRel(2.0, 1e-15));
  for (double p : P(0.125, 4)) CHECK_THAT(p, WithinRel(2.0, 1e-14));
  CHECK_THROWS_AS(affine_stretch(0.0, 3), Error);
  CHECK_THROWS_AS(affine_stretch(2.0, 1), Error);
}

TEST_CASE("laminate sequence", "[construct]") {
  const MappingSequence s = laminate_sequence(1.0, 3.0, 0.5, 3);
  CHECK(s.param("t0") == 2.0);
  for (double p : dilatation_field(s.limit).P) CHECK(p == 2.0);
  for (int j = 1; j <= 20; ++j) {
    const auto ph = s.member(j).phases(Box::unit(3));
    REQUIRE(ph.size() == 2);
    CHECK(P_of(ph[0], 3) == 1.0);
    CHECK_THAT(P_of(ph[1], 3), WithinRel(3.0, 1e-15));
    CHECK_THAT(ph[0].measure, WithinAbs(0.5, 1e-14));
    CHECK_THAT(ph[1].measure, WithinAbs(0.5, 1e-14));
  }
  SECTION("uniform bound dominates node distance and decreases") {
    for (const auto& seq : {s, laminate_sequence(1.0, 7.0, 0.3, 3), collapse_sequence(1.5, 2.0, 3)}) {
      double prev = kInf;
      for (int j = 1; j <= 20; ++j) {
        const double b = seq.uniform_bound(j);
        CHECK(b < prev);
        prev = b;
        CHECK(node_distance(seq.member(j), seq.limit) <= b);
      }
    }
  }
  SECTION("members are continuous across slab interfaces") {
    for (int j : {1, 4, 9}) {
      const GridMapping m = s.member(j);
      const double p = std::ldexp(1.0, -j);
      for (int k = 0; k < (1 << j); ++k) {
        for (double x : {k * p + 0.5 * p, (k + 1) * p}) {
          const auto below = m({0.3, 0.3, x * (1.0 - 1e-15)});
          const auto at = m({0.3, 0.3, x});
          CHECK_THAT(below[2], WithinAbs(at[2], 1e-12));
        }
      }
    }
  }
  SECTION("lambda = 1 degenerates to the stretch t1") {
    const MappingSequence d = laminate_sequence(2.5, 3.0, 1.0, 3);
    for (int j : {1, 5, 12}) CHECK(node_distance(d.member(j), d.limit) < 1e-12);
  }
  CHECK_THROWS_AS(laminate_sequence(0.5, 3.0, 0.5, 3), Error);
  CHECK_THROWS_AS(laminate_sequence(1.0, 3.0, 1.5, 3), Error);
}

TEST_CASE("collapse sequence", "[construct]") {
  const MappingSequence s = collapse_sequence(1.5, 2.0, 3);
  CHECK_THAT(s.param("lambda"), WithinAbs(2.0 / 7.0, 1e-15));
  CHECK(s.param("t1") == 0.25);
  CHECK(s.param("K") == 4.0);
  CHECK_THAT(s.param("lambda") * 0.25 + (1.0 - s.param("lambda")) * 2.0, WithinAbs(1.5, 1e-15));
  for (double p : dilatation_field(s.limit).P) CHECK_THAT(p, WithinRel(1.5, 1e-15));
  for (int j : {1, 3, 7}) {
    const DilatationField f = dilatation_field(s.member(j));
    for (std::size_t c = 0; c < f.size(); ++c) CHECK_THAT(f.P[c], WithinAbs(2.0, 1e-12));
    for (std::size_t c = 0; c < f.size(); ++c) CHECK_THAT(f.K[c], WithinAbs(4.0, 1e-12));
  }
  CHECK_THROWS_AS(collapse_sequence(2.0, 2.0, 3), Error);
  CHECK_THROWS_AS(collapse_sequence(0.5, 2.0, 3), Error);
}

TEST_CASE("cantor sequence", "[construct]") {
  const MappingSequence s = cantor_sequence(2.0, doubling_schedule(2.0), 0.5, 3);
  CHECK_THAT(s.param("q"), WithinAbs(1.0 / 3.0, 1e-16));
  // Surviving measure after j removals: 1 - sum_{i<=j} q^i.
  for (int j = 1; j <= 25; ++j) {
    double removed = 0.0;
    for (int i = 1; i <= j; ++i) removed += std::pow(1.0 / 3.0, i);
    CHECK_THAT(CantorProfile(0.5, j, 1.0, 1.0).set_measure(), WithinAbs(1.0 - removed, 1e-15));
  }
  const auto& psi = s.limit.profile_ptr();
  CHECK_THAT(psi->value(1.0), WithinAbs(1.0, 1e-12));
  const auto ph = s.limit.phases(Box::unit(3));
  CHECK(P_of(ph[0], 3) == kInf);
  CHECK_THAT(ph[0].measure, WithinAbs(0.5, 1e-12));
  SECTION("members: P is tau_j on E_{j+1} and tau0 off it") {
    for (int j = 1; j <= 12; ++j) {
      const auto mp = s.member(j).phases(Box::unit(3));
      CHECK_THAT(P_of(mp[0], 3), WithinRel(2.0 * std::ldexp(1.0, j), 1e-13));
      CHECK_THAT(P_of(mp[1], 3), WithinRel(2.0, 1e-15));
      CHECK_THAT(mp[0].measure, WithinAbs(CantorProfile(0.5, j + 1, 1.0, 1.0).set_measure(), 1e-14));
    }
  }
  SECTION("uniform bound") {
    double prev = kInf;
    for (int j = 1; j <= 20; ++j) {
      const double b = s.uniform_bound(j);
      CHECK(b <= prev);
      prev = b;
      CHECK(node_distance(s.member(j), s.limit) <= b + 1e-12);
    }
    CHECK(s.uniform_bound(20) < 1e-5);
  }
  SECTION("limit is tau0-Lipschitz on node pairs") {
    double worst = 0.0;
    for (int a = 0; a <= 729; a += 1) {
      for (int b = a + 1; b <= 729; b += 7) {
        const double xa = a / 729.0, xb = b / 729.0;
        worst = std::max(worst, std::abs(psi->value(xb) - psi->value(xa)) - 2.0 * (xb - xa));
      }
    }
    CHECK(worst <= 1e-12);
  }
  SECTION("share of 3^-k cells meeting E tends to 1/2") {
    const auto& cp = dynamic_cast<const CantorProfile&>(*psi);
    for (int k : {4, 8, 12}) {
      const int cells = static_cast<int>(std::pow(3.0, k));
      int on = 0;
      for (int c = 0; c < cells; ++c) on += cp.on_set((c + 0.5) / cells) ? 1 : 0;
      CHECK_THAT(static_cast<double>(on) / cells, WithinAbs(0.5, 4.0 * std::pow(2.0 / 3.0, k)));
    }
  }
  CHECK_THROWS_AS(cantor_sequence(2.0, [](int) { return 3.0; }, 0.5, 3), Error);
  CHECK_THROWS_AS(cantor_sequence(2.0, doubling_schedule(2.0), 1.0, 3), Error);
}

TEST_CASE("left jump sequence", "[construct]") {
  const MappingSequence s = left_jump_sequence(2.0, left_jump_schedule(2.0), 3);
  for (int j : {1, 2, 10}) {
    for (double p : dilatation_field(s.member(j)).P) CHECK_THAT(p, WithinRel(2.0 - std::ldexp(1.0, -j), 1e-15));
    CHECK_THAT(node_distance(s.member(j), s.limit), WithinAbs(std::ldexp(1.0, -j), 1e-15));
    CHECK(s.uniform_bound(j) == std::ldexp(1.0, -j));
  }
  for (double p : dilatation_field(s.limit).P) CHECK(p == 2.0);
  CHECK_THROWS_AS(left_jump_sequence(2.0, [](int j) { return 2.0 + j; }, 3), Error);
  CHECK_THROWS_AS(left_jump_sequence(1.0, left_jump_schedule(1.0), 3), Error);
}

TEST_CASE("counterexample dispatcher", "[construct][dispatch]") {
  SECTION("sqrt is caught as non-convex") {
    const Dispatch d = counterexample_for(GrowthFunction::power(1.0, 0.5), 3);
    REQUIRE(d.reason == DispatchReason::non_convex);
    REQUIRE(d.sequence);
    CHECK(d.sequence->kind == SequenceKind::laminate);
    const double t0 = d.lambda * d.t1 + (1.0 - d.lambda) * d.t2;
    CHECK(std::sqrt(t0) > d.lambda * std::sqrt(d.t1) + (1.0 - d.lambda) * std::sqrt(d.t2));
  }
  SECTION("t^2 is certified good") {
    const Dispatch d = counterexample_for(GrowthFunction::power(1.0, 2.0), 3);
    CHECK(d.reason == DispatchReason::certified_good);
    CHECK_FALSE(d.sequence);
    CHECK(d.grid_points >= 4096);
  }
  SECTION("a drop from 3 at 1.5 to 1 at 2 gives the collapse") {
    const Dispatch d = counterexample_for(bump(), 3);
    REQUIRE(d.reason == DispatchReason::non_monotone);
    CHECK(d.tau0 == 1.5);
    CHECK(d.tau_star == 2.0);
    CHECK(d.sequence->kind == SequenceKind::collapse);
  }
  SECTION("jump at a finite T gives the left jump") {
    const GrowthFunction g = GrowthFunction::linear(0.0, 1.0).with_domain_end(2.0).with_value_at_domain_end(10.0);
    const Dispatch d = counterexample_for(g, 3);
    REQUIRE(d.reason == DispatchReason::left_discontinuous);
    CHECK(d.T == 2.0);
    CHECK(d.sequence->kind == SequenceKind::left_jump);
  }
  SECTION("the default phi(T0) = inf is a jump over a finite left limit") {
    const GrowthFunction g = GrowthFunction::linear(0.0, 1.0).with_domain_end(2.0);
    CHECK(counterexample_for(g, 3).reason == DispatchReason::left_discontinuous);
  }
  SECTION("constant with phi(inf) = inf gives the cantor staircase") {
    const GrowthFunction g = GrowthFunction::constant(1.0).with_value_at_infinity(kInf);
    const Dispatch d = counterexample_for(g, 3);
    REQUIRE(d.reason == DispatchReason::discontinuous_at_infinity);
    CHECK(d.sequence->kind == SequenceKind::cantor);
  }
}

TEST_CASE("dispatcher soundness", "[construct][dispatch][slow]") {
  const std::vector<GrowthFunction> bad = {
      GrowthFunction::power(1.0, 0.5),
      GrowthFunction::logpow(1.0, 1.0, -1.0),
      bump(),
      GrowthFunction::linear(0.0, 1.0).with_domain_end(2.0).with_value_at_domain_end(10.0),
      GrowthFunction::power(1.0, 2.0).with_domain_end(3.0).with_value_at_domain_end(50.0),
      GrowthFunction::constant(1.0).with_value_at_infinity(kInf),
      GrowthFunction::tabulated({0.0, 0.0, 2.0, 2.0, 3.0, 2.0, 4.0, 5.0}),
  };
  for (const GrowthFunction& g : bad) {
    const Dispatch d = counterexample_for(g, 3);
    INFO(g.label() << ": " << d.witness);
    REQUIRE(d.sequence);
    FunctionalSpec spec;
    spec.phi = g;
    const auto r = semicontinuity_experiment(*d.sequence, spec, {12});
    CHECK(r.verdict == Verdict::strict_violation);
  }
  const std::vector<GrowthFunction> good = {GrowthFunction::power(1.0, 2.0), GrowthFunction::power(1.0, 3.0),
                                            GrowthFunction::linear(-1.0, 1.0),
                                            GrowthFunction::exponential(1.0, 1.0, 1.0)};
  for (const GrowthFunction& g : good) {
    INFO(g.label());
    REQUIRE(counterexample_for(g, 3).reason == DispatchReason::certified_good);
    FunctionalSpec spec;
    spec.phi = g;
    for (const MappingSequence& s : stock_sequences(3)) {
      INFO(to_string(s.kind));
      CHECK(semicontinuity_experiment(s, spec, {12}).verdict == Verdict::holds);
    }
  }
}
