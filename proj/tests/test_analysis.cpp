#include <gtest/gtest.h>

#include <cmath>

#include "ttw/analysis.hpp"

namespace {

using ttw::ModelParameters;
using ttw::PhaseState;
constexpr double kPi = ttw::kPi;

ModelParameters params_k(long long m, long long n, double omega = 1.0) {
  return ModelParameters::rational(omega, 1.0, 2.0, m, n);
}

TEST(DriftReport, SymmetricRadialOrbitKeepsCZero) {
  const auto p = ModelParameters::rational(1, 1, 1, 1, 1);
  const auto traj = ttw::integrate(p, {1.0, kPi / 4, 0.0, 0.0}, 10 * kPi / 2);
  const auto rep = ttw::drift_report(p, traj);
  ASSERT_NE(rep.find("re_c"), nullptr);
  EXPECT_NEAR(rep.find("re_c")->initial, 0.0, 1e-14);
  EXPECT_LT(rep.find("re_c")->max_abs_deviation, 1e-9);
  EXPECT_LT(rep.find("im_c")->max_abs_deviation, 1e-9);
}

TEST(DriftReport, GenericOrbitConservesC) {
  const auto p = params_k(1, 1);
  const auto traj = ttw::integrate(p, {1.0, kPi / 4, 1.0, 1.0}, 10 * kPi / 2);
  const auto rep = ttw::drift_report(p, traj);
  EXPECT_NEAR(rep.find("re_c")->initial, 19.0, 1e-12);
  EXPECT_NEAR(rep.find("im_c")->initial, -3 * std::sqrt(7.0), 1e-12);
  EXPECT_NEAR(rep.find("E")->initial, 9.0, 1e-12);
  EXPECT_NEAR(rep.find("A")->initial, 7.0, 1e-12);
  for (const auto& q : rep.quantities) EXPECT_LT(q.max_rel_deviation, 1e-7) << q.name;
  EXPECT_LT(rep.modulus_identity_residual, 1e-12);
  EXPECT_EQ(rep.samples, traj.size());
}

TEST(DriftReport, IrrationalModeOmitsC) {
  const auto p = ModelParameters::irrational(1, 1, 2, std::sqrt(2.0));
  const auto traj = ttw::integrate(p, {1.0, 0.4, 0.5, 0.5}, 2.0);
  const auto rep = ttw::drift_report(p, traj);
  EXPECT_EQ(rep.find("re_c"), nullptr);
  EXPECT_LT(rep.find("E")->max_rel_deviation, 1e-8);
}

TEST(PoissonBracket, CanonicalPair) {
  const PhaseState s{1.3, 0.4, -0.2, 0.7};
  const auto b = ttw::poisson_bracket([](const PhaseState& x) { return x.r; },
                                      [](const PhaseState& x) { return x.p_r; }, s);
  EXPECT_NEAR(b.value, 1.0, 1e-10);
  const auto c = ttw::poisson_bracket([](const PhaseState& x) { return x.phi; },
                                      [](const PhaseState& x) { return x.p_phi; }, s);
  EXPECT_NEAR(c.value, 1.0, 1e-10);
  const auto z = ttw::poisson_bracket([](const PhaseState& x) { return x.r; },
                                      [](const PhaseState& x) { return x.p_phi; }, s);
  EXPECT_NEAR(z.value, 0.0, 1e-12);
}

TEST(PoissonBracket, GradientMatchesHamiltonsEquations) {
  const auto p = params_k(3, 2);
  const auto s = ttw::sample_admissible_state(p, 4, ttw::relative_energy_range(p));
  const auto g = ttw::numeric_gradient([&](const PhaseState& x) { return ttw::hamiltonian(p, x); }, s);
  const auto d = ttw::eom_rhs(p, s);
  EXPECT_NEAR(g[2], d.dr, 1e-8 * std::abs(d.dr) + 1e-9);
  EXPECT_NEAR(g[3], d.dphi, 1e-8 * std::abs(d.dphi) + 1e-9);
  EXPECT_NEAR(-g[0], d.dp_r, 1e-8 * std::abs(d.dp_r) + 1e-9);
  EXPECT_NEAR(-g[1], d.dp_phi, 1e-8 * std::abs(d.dp_phi) + 1e-9);
}

TEST(PoissonBracket, SelfBracketsVanishExactly) {
  const auto p = params_k(1, 1);
  auto H = [&](const PhaseState& x) { return ttw::hamiltonian(p, x); };
  auto A = [&](const PhaseState& x) { return ttw::angular_integral(p, x); };
  const PhaseState s{1.1, 0.6, 0.3, -0.4};
  EXPECT_EQ(ttw::poisson_bracket(H, H, s).value, 0.0);
  EXPECT_EQ(ttw::poisson_bracket(A, A, s).value, 0.0);
}

TEST(PoissonBracket, IntegralsCommuteWithH) {
  for (auto [m, n] : {std::pair{1, 1}, {3, 2}, {1, 2}}) {
    const auto p = params_k(m, n);
    auto H = [&](const PhaseState& x) { return ttw::hamiltonian(p, x); };
    auto A = [&](const PhaseState& x) { return ttw::angular_integral(p, x); };
    auto reC = [&](const PhaseState& x) { return ttw::superintegral(p, x).real(); };
    auto imC = [&](const PhaseState& x) { return ttw::superintegral(p, x).imag(); };
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = ttw::sample_admissible_state(p, seed, ttw::relative_energy_range(p));
      EXPECT_LT(ttw::poisson_bracket(p, H, A, s).normalized(), 1e-6);
      EXPECT_LT(ttw::poisson_bracket(p, reC, H, s).normalized(), 1e-6);
      EXPECT_LT(ttw::poisson_bracket(p, imC, H, s).normalized(), 1e-6);
    }
  }
}

TEST(PoissonBracket, NonIntegralIsDetected) {
  // p_r does not commute with H; the normalized residual is O(1).
  const auto p = params_k(1, 1);
  auto H = [&](const PhaseState& x) { return ttw::hamiltonian(p, x); };
  auto pr = [](const PhaseState& x) { return x.p_r; };
  EXPECT_GT(ttw::poisson_bracket(p, pr, H, {1.4, 0.7, 0.3, 0.2}).normalized(), 1e-2);
}

TEST(PoissonBracket, Errors) {
  const auto p = params_k(1, 1);
  auto H = [&](const PhaseState& x) { return ttw::hamiltonian(p, x); };
  auto constant = [](const PhaseState&) { return 3.0; };
  EXPECT_THROW(ttw::poisson_bracket(constant, constant, {1, 0.5, 0, 0}), ttw::IllConditionedError);
  EXPECT_THROW(ttw::poisson_bracket(p, H, H, {1, 2e-5, 0, 0}), ttw::DomainError);
  EXPECT_THROW(ttw::poisson_bracket(p, H, H, {1, kPi / 2 - 2e-5, 0, 0}), ttw::DomainError);
}

TEST(RadialPeriod, MatchesHarmonicLawForU) {
  for (double omega : {1.0, 2.0}) {
    const auto p = params_k(3, 2, omega);
    for (std::uint64_t seed : {1u, 2u}) {
      const auto s0 = ttw::sample_admissible_state(p, seed, ttw::relative_energy_range(p));
      const auto traj = ttw::integrate(p, s0, 5 * kPi / (2 * omega));
      EXPECT_NEAR(ttw::estimate_radial_period(traj), kPi / (2 * omega), 1e-6);
    }
  }
}

TEST(RadialPeriod, SymmetricOrbitHasSamePeriod) {
  const auto p = ModelParameters::rational(1, 1.5, 1.5, 1, 1);
  const auto sym = ttw::integrate(p, {0.8, kPi / 4, 0.3, 0.0}, 4 * kPi / 2);
  const auto gen = ttw::integrate(p, {1.2, 0.5, -0.4, 0.8}, 4 * kPi / 2);
  EXPECT_NEAR(ttw::estimate_radial_period(sym), ttw::estimate_radial_period(gen), 1e-6);
}

TEST(RadialPeriod, InsufficientSpan) {
  const auto p = params_k(1, 1);
  EXPECT_THROW(ttw::estimate_radial_period(ttw::integrate(p, {1, 0.6, 0.5, 0.5}, kPi)), ttw::InsufficientSpanError);
}

TEST(Closure, UnitKReturnsAfterQuarterPeriod) {
  const auto p = params_k(1, 1);
  const auto rep = ttw::detect_closure(p, {1.0, 0.6, 0.8, 0.9}, kPi / 2 * 1.05, 1e-6);
  ASSERT_TRUE(rep.recurrence_time.has_value());
  EXPECT_NEAR(*rep.recurrence_time, kPi / 2, 1e-6);
  EXPECT_LT(rep.min_return_distance, 1e-6);
  EXPECT_NEAR(*rep.predicted_time, kPi / 2, 1e-15);
  ASSERT_TRUE(rep.configuration_closure_time.has_value());
  EXPECT_NEAR(*rep.configuration_closure_time, kPi / 2, 1e-6);
}

TEST(Closure, ThreeHalvesReturnsByJointPeriod) {
  const auto p = params_k(3, 2);
  const auto s0 = ttw::sample_admissible_state(p, 3, ttw::relative_energy_range(p));
  const auto rep = ttw::detect_closure(p, s0, 4.0, 1e-6);
  ASSERT_TRUE(rep.recurrence_time.has_value());
  EXPECT_LE(*rep.recurrence_time, kPi + 1e-3);
  EXPECT_GT(*rep.recurrence_time, kPi / 2 + 1e-3);  // not after a single radial period
}

TEST(Closure, IrrationalKDoesNotRecur) {
  const auto p = ModelParameters::irrational(1, 1, 2, std::sqrt(2.0));
  const double width = p.sector_width();
  const auto rep = ttw::detect_closure(p, {1.0, 0.5 * width, 1.0, 1.0}, 20 * kPi, 1e-6);
  EXPECT_FALSE(rep.recurrence_time.has_value());
  EXPECT_GT(rep.min_return_distance, 1e-2);
  EXPECT_FALSE(rep.predicted_time.has_value());
}

TEST(Closure, HorizonShorterThanPredictionIsRejected) {
  const auto p = params_k(3, 2);
  EXPECT_THROW(ttw::detect_closure(p, {1.0, 0.5, 0.5, 0.5}, 2.0, 1e-6), ttw::ConfigurationError);
  EXPECT_THROW(ttw::detect_closure(p, {1.0, 0.5, 0.5, 0.5}, 4.0, 0.0), ttw::ConfigurationError);
}

TEST(Closure, DistanceMetric) {
  const auto p = params_k(1, 1);
  const PhaseState ref{2.0, 0.5, 1.0, 1.0};
  const ttw::PhaseDistance d(p, ref);
  EXPECT_EQ(d(ref), 0.0);
  const double sqrtE = std::sqrt(ttw::hamiltonian(p, ref));
  EXPECT_NEAR(d({2.2, 0.5, 1.0, 1.0}), 0.1, 1e-14);
  EXPECT_NEAR(d({2.0, 0.5 + kPi / 20, 1.0, 1.0}), 0.1, 1e-14);
  EXPECT_NEAR(d({2.0, 0.5, 1.0 + 0.1 * sqrtE, 1.0}), 0.1, 1e-14);
  EXPECT_NEAR(d.configuration({2.0, 0.5, 5.0, -3.0}), 0.0, 0.0);
}

TEST(PhaseRotation, UnitKRates) {
  const auto p = params_k(1, 1);
  const auto traj = ttw::integrate(p, {1.0, kPi / 4, 1.0, 1.0}, 10 * kPi / 2);
  const auto rates = ttw::phase_rotation_check(p, traj);
  EXPECT_NEAR(std::abs(rates.radial), 4.0, 4e-5);
  EXPECT_NEAR(std::abs(rates.angular), 4.0, 4e-5);
  EXPECT_LT(rates.radial * rates.angular, 0.0);
  EXPECT_LT(std::abs(*rates.weighted_sum), 1e-6);
}

TEST(PhaseRotation, ThreeHalvesRates) {
  const auto p = params_k(3, 2);
  const auto s0 = ttw::sample_admissible_state(p, 8, ttw::relative_energy_range(p));
  const auto traj = ttw::integrate(p, s0, 10 * kPi);
  const auto rates = ttw::phase_rotation_check(p, traj);
  EXPECT_NEAR(std::abs(rates.radial), 4.0, 4e-5);
  EXPECT_NEAR(std::abs(rates.angular), 6.0, 6e-5);
  EXPECT_LT(std::abs(*rates.weighted_sum), 4e-6);
}

TEST(PhaseRotation, InsufficientSpan) {
  const auto p = params_k(3, 2);
  const auto s0 = ttw::sample_admissible_state(p, 8, ttw::relative_energy_range(p));
  EXPECT_THROW(ttw::phase_rotation_check(p, ttw::integrate(p, s0, 1.5 * kPi)), ttw::InsufficientSpanError);
}

TEST(PhaseRotation, RadialRateIsOrbitIndependent) {
  const auto p = params_k(1, 2, 1.5);
  const auto a = ttw::integrate(p, ttw::sample_admissible_state(p, 1, ttw::relative_energy_range(p)), 20.0);
  const auto b = ttw::integrate(p, ttw::sample_admissible_state(p, 2, ttw::relative_energy_range(p, 3.0, 5.0)), 20.0);
  EXPECT_NEAR(std::abs(ttw::phase_rotation_check(p, a).radial), std::abs(ttw::phase_rotation_check(p, b).radial), 1e-6);
}

TEST(PhaseRotation, DegenerateOrbit) {
  // alpha = beta on the midline with p_phi = 0: f2 vanishes identically.
  const auto p = ModelParameters::rational(1, 1, 1, 1, 1);
  const auto traj = ttw::integrate(p, {1.0, kPi / 4, 0.0, 0.0}, 5.0);
  EXPECT_THROW(ttw::phase_rotation_check(p, traj), ttw::DegenerateOrbitError);
}

}  // namespace
