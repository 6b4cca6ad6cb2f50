#include <gtest/gtest.h>

#include <cmath>

#include "ttw/dynamics.hpp"

namespace {

using ttw::IntegratorConfig;
using ttw::ModelParameters;
using ttw::PhaseState;
using ttw::Scheme;
constexpr double kPi = ttw::kPi;

double max_abs_diff(const PhaseState& a, const PhaseState& b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.phi - b.phi), std::abs(a.p_r - b.p_r), std::abs(a.p_phi - b.p_phi)});
}

TEST(Integrate, SymmetricRadialLibrationReturnsAfterOnePeriod) {
  const auto p = ModelParameters::rational(1, 1, 1, 1, 1);
  const PhaseState s0{1.0, kPi / 4, 0.0, 0.0};
  const auto traj = ttw::integrate(p, s0, kPi / 2);
  EXPECT_LT(max_abs_diff(traj.back().state, s0), 1e-8);
  for (const auto& s : traj.samples()) EXPECT_NEAR(s.state.phi, kPi / 4, 1e-12);
}

TEST(Integrate, EnergyDriftOverTenPeriods) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  const PhaseState s0{1.0, kPi / 4, 1.0, 1.0};
  const auto traj = ttw::integrate(p, s0, 10 * kPi / 2);
  const double e0 = ttw::hamiltonian(p, s0);
  double worst = 0.0;
  for (const auto& s : traj.samples()) worst = std::max(worst, std::abs(ttw::hamiltonian(p, s.state) - e0) / e0);
  EXPECT_LT(worst, 1e-8);
}

TEST(Integrate, ZeroHorizonKeepsSingleSample) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  const PhaseState s0{1.0, 0.5, 0.2, -0.3};
  const auto traj = ttw::integrate(p, s0, 0.0);
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj.front().t, 0.0);
  EXPECT_EQ(traj.front().state, s0);
}

TEST(Integrate, RejectsBadInput) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  EXPECT_THROW(ttw::integrate(p, {1.0, 0.5, 0, 0}, -1.0), ttw::ConfigurationError);
  EXPECT_THROW(ttw::integrate(p, {1.0, 2.0, 0, 0}, 1.0), ttw::DomainError);
  IntegratorConfig bad;
  bad.rel_tol = 0.0;
  EXPECT_THROW(ttw::integrate(p, {1.0, 0.5, 0, 0}, 1.0, bad), ttw::ConfigurationError);
  IntegratorConfig mid;
  mid.scheme = Scheme::implicit_midpoint;
  mid.dt = -1;
  EXPECT_THROW(ttw::integrate(p, {1.0, 0.5, 0, 0}, 1.0, mid), ttw::ConfigurationError);
}

TEST(Integrate, MaxStepsExhaustionIsAStepFailure) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  IntegratorConfig cfg;
  cfg.max_steps = 10;
  EXPECT_THROW(ttw::integrate(p, {1.0, 0.5, 0.3, 0.2}, 5.0, cfg), ttw::StepFailure);
}

TEST(Integrate, TimesIncreaseAndStatesStayInSector) {
  for (auto [m, n] : {std::pair{1, 1}, {3, 2}, {5, 2}, {1, 3}}) {
    const auto p = ModelParameters::rational(1, 1, 2, m, n);
    const auto s0 = ttw::sample_admissible_state(p, 42, ttw::relative_energy_range(p, 2.0, 6.0));
    for (Scheme scheme : {Scheme::adaptive_embedded, Scheme::implicit_midpoint}) {
      IntegratorConfig cfg;
      cfg.scheme = scheme;
      cfg.dt = 1e-3;
      const auto traj = ttw::integrate(p, s0, 3.0, cfg);
      EXPECT_EQ(traj.back().t, 3.0);
      for (std::size_t i = 1; i < traj.size(); ++i) {
        EXPECT_GT(traj.samples()[i].t, traj.samples()[i - 1].t);
        EXPECT_TRUE(ttw::is_valid(p, traj.samples()[i].state));
      }
    }
  }
}

TEST(Integrate, StepCeilingIsRespected) {
  const auto p = ModelParameters::rational(2, 1, 2, 1, 1);
  const auto traj = ttw::integrate(p, {0.7, 0.6, 0.1, 0.1}, 2.0);
  const double ceiling = kPi / (2 * 2.0) / 200;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    EXPECT_LE(traj.samples()[i].t - traj.samples()[i - 1].t, ceiling * (1 + 1e-12));
  }
}

TEST(Integrate, TimeReversal) {
  const auto p = ModelParameters::rational(1, 1, 2, 3, 2);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s0 = ttw::sample_admissible_state(p, seed, ttw::relative_energy_range(p));
    const auto fwd = ttw::propagate(p, s0, kPi / 2, cfg);
    const auto back = ttw::propagate(p, {fwd.r, fwd.phi, -fwd.p_r, -fwd.p_phi}, kPi / 2, cfg);
    const PhaseState expect{s0.r, s0.phi, -s0.p_r, -s0.p_phi};
    const double scale = std::max({1.0, std::abs(s0.p_r), std::abs(s0.p_phi), s0.r});
    EXPECT_LT(max_abs_diff(back, expect), 10 * cfg.rel_tol * scale);
    // Tighter tolerance tightens the reversal error.
    IntegratorConfig tight = cfg;
    tight.rel_tol = 1e-12;
    tight.abs_tol = 1e-14;
    const auto fwd2 = ttw::propagate(p, s0, kPi / 2, tight);
    const auto back2 = ttw::propagate(p, {fwd2.r, fwd2.phi, -fwd2.p_r, -fwd2.p_phi}, kPi / 2, tight);
    EXPECT_LT(max_abs_diff(back2, expect), max_abs_diff(back, expect) + 1e-12);
  }
}

TEST(Integrate, ImplicitMidpointIsSecondOrder) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  const PhaseState s0{1.0, kPi / 4, 1.0, 1.0};
  const double t_end = 1.0;
  IntegratorConfig ref_cfg;
  ref_cfg.rel_tol = 1e-12;
  ref_cfg.abs_tol = 1e-14;
  const auto ref = ttw::propagate(p, s0, t_end, ref_cfg);

  IntegratorConfig mid;
  mid.scheme = Scheme::implicit_midpoint;
  std::vector<double> errors;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    mid.dt = dt;
    errors.push_back(max_abs_diff(ttw::propagate(p, s0, t_end, mid), ref));
  }
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double ratio = errors[i] / errors[i + 1];
    EXPECT_GT(ratio, 3.6);
    EXPECT_LT(ratio, 4.4);
  }
}

TEST(Integrate, ImplicitMidpointBoundsLongTermEnergyError) {
  const auto p = ModelParameters::rational(1, 1, 2, 3, 2);
  const auto s0 = ttw::sample_admissible_state(p, 5, ttw::relative_energy_range(p));
  IntegratorConfig mid;
  mid.scheme = Scheme::implicit_midpoint;
  mid.dt = 2e-3;
  const double e0 = ttw::hamiltonian(p, s0);
  const auto short_run = ttw::integrate(p, s0, 10.0, mid);
  const auto long_run = ttw::integrate(p, s0, 100.0, mid);
  auto worst = [&](const ttw::Trajectory& tr) {
    double w = 0.0;
    for (const auto& s : tr.samples()) w = std::max(w, std::abs(ttw::hamiltonian(p, s.state) - e0) / e0);
    return w;
  };
  // No secular growth: ten times the horizon, comparable worst-case error.
  EXPECT_LT(worst(long_run), 3.0 * worst(short_run) + 1e-12);
  EXPECT_LT(worst(long_run), 1e-3);
}

TEST(Integrate, DenseOutputMatchesReintegration) {
  const auto p = ModelParameters::rational(1, 1, 2, 3, 2);
  const auto s0 = ttw::sample_admissible_state(p, 9, ttw::relative_energy_range(p));
  const auto traj = ttw::integrate(p, s0, 2.0);
  // Cubic Hermite is O(h^4); with the default step ceiling that is a few 1e-6 near the walls.
  for (double t : {0.1234, 0.777, 1.5, 1.999}) {
    const auto exact = ttw::propagate(p, s0, t);
    EXPECT_LT(max_abs_diff(traj.interpolate(t), exact), 1e-5);
    EXPECT_LT(max_abs_diff(traj.reintegrate(t), exact), 1e-9);
  }
  EXPECT_EQ(traj.interpolate(0.0), s0);
}

TEST(Sampler, EnergyInRangeAndDeterministic) {
  const auto p = ModelParameters::rational(1, 1, 2, 3, 2);
  const auto range = ttw::relative_energy_range(p);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = ttw::sample_admissible_state(p, seed, range);
    const double e = ttw::hamiltonian(p, s);
    EXPECT_GE(e, range.lo);
    EXPECT_LE(e, range.hi);
    EXPECT_EQ(s, ttw::sample_admissible_state(p, seed, range));
  }
  EXPECT_NE(ttw::sample_admissible_state(p, 1, range), ttw::sample_admissible_state(p, 2, range));
}

TEST(Sampler, ThousandSeedsAreAdmissible) {
  const auto p = ModelParameters::rational(1, 1, 2, 3, 2);
  const auto range = ttw::relative_energy_range(p);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = ttw::sample_admissible_state(p, seed, range);
    const auto inv = ttw::evaluate_invariants(p, s);
    EXPECT_TRUE(ttw::admissibility(p, inv.E, inv.A).admissible);
  }
}

TEST(Sampler, Errors) {
  const auto p = ModelParameters::rational(1, 1, 2, 1, 1);
  EXPECT_THROW(ttw::sample_admissible_state(p, 0, {1.0, 2.0}), ttw::ConfigurationError);
  EXPECT_THROW(ttw::sample_admissible_state(p, 0, {3.0, 1.0}), ttw::ConfigurationError);
  // A band so thin that the attempt budget runs out.
  const double e0 = ttw::minimum_energy(p);
  EXPECT_THROW(ttw::sample_admissible_state(p, 0, {e0 * (1 + 1e-12), e0 * (1 + 2e-12)}, 1000), ttw::ExhaustionError);
}

}  // namespace
