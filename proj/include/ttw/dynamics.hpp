#ifndef TTW_DYNAMICS_HPP
#define TTW_DYNAMICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "ttw/model.hpp"

namespace ttw {

enum class Scheme { adaptive_embedded, implicit_midpoint };

struct IntegratorConfig {
  Scheme scheme = Scheme::adaptive_embedded;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double dt = 1e-3;  // implicit_midpoint only
  std::int64_t max_steps = 50'000'000;
  double boundary_guard = kDefaultGuard;
  /// Step ceiling; when empty, (pi/(2w))/200 so every radial oscillation is resolved.
  std::optional<double> max_step;
  /// Fixed-point residual at which an implicit midpoint step is accepted.
  double midpoint_tol = 1e-14;

  double step_ceiling(const ModelParameters& params) const {
    return max_step.value_or(kPi / (2.0 * params.omega()) / 200.0);
  }

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigurationError("integrator tolerances must be positive");
    if (scheme == Scheme::implicit_midpoint && !(dt > 0.0)) throw ConfigurationError("dt must be positive");
    if (max_steps <= 0) throw ConfigurationError("max_steps must be positive");
    if (!(boundary_guard >= 0.0)) throw ConfigurationError("boundary_guard must be nonnegative");
    if (max_step && !(*max_step > 0.0)) throw ConfigurationError("max_step must be positive");
    if (!(midpoint_tol > 0.0)) throw ConfigurationError("midpoint_tol must be positive");
  }
};

struct StepStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
};

struct Sample {
  double t = 0.0;
  PhaseState state;
  Tangent rate;  // Hamilton's equations at `state`, kept for dense output
};

/// Time-ordered integration record. Between accepted steps the flow is
/// reconstructed by cubic Hermite interpolation, whose error is O(h^4) in the
/// step size.
class Trajectory {
 public:
  Trajectory(ModelParameters params, IntegratorConfig config) : params_(params), config_(config) {}

  const ModelParameters& params() const { return params_; }
  const IntegratorConfig& config() const { return config_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const StepStats& step_stats() const { return stats_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& front() const { return samples_.front(); }
  const Sample& back() const { return samples_.back(); }
  double duration() const { return samples_.empty() ? 0.0 : samples_.back().t - samples_.front().t; }

  /// Index i with samples[i].t <= t <= samples[i+1].t.
  std::size_t segment_index(double t) const {
    if (samples_.size() < 2) return 0;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const Sample& s) { return v < s.t; });
    const auto idx = static_cast<std::size_t>(std::distance(samples_.begin(), it));
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, samples_.size() - 2);
  }

  /// Dense output at time t (clamped to the recorded span).
  PhaseState interpolate(double t) const {
    if (samples_.empty()) throw ConfigurationError("interpolate on empty trajectory");
    if (samples_.size() == 1) return samples_.front().state;
    const std::size_t i = segment_index(t);
    const Sample& a = samples_[i];
    const Sample& b = samples_[i + 1];
    const double h = b.t - a.t;
    const double s = std::clamp((t - a.t) / h, 0.0, 1.0);
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    const auto ya = a.state.to_array();
    const auto yb = b.state.to_array();
    const auto fa = a.rate.to_array();
    const auto fb = b.rate.to_array();
    std::array<double, 4> y{};
    for (std::size_t j = 0; j < 4; ++j) {
      y[j] = h00 * ya[j] + h10 * h * fa[j] + h01 * yb[j] + h11 * h * fb[j];
    }
    return PhaseState::from_array(y);
  }

  /// State at time t obtained by integrating from the last stored sample at or
  /// before t with the trajectory's own configuration. Defined after integrate().
  PhaseState reintegrate(double t) const;

  void push(double t, const PhaseState& state, const Tangent& rate) { samples_.push_back({t, state, rate}); }
  StepStats& stats() { return stats_; }

 private:
  ModelParameters params_;
  IntegratorConfig config_;
  std::vector<Sample> samples_;
  StepStats stats_;
};

namespace detail {

using Vec4 = std::array<double, 4>;

inline Vec4 axpy(const Vec4& y, double h, std::initializer_list<std::pair<double, const Vec4*>> terms) {
  Vec4 out = y;
  for (const auto& [coef, k] : terms) {
    if (coef == 0.0) continue;
    for (std::size_t j = 0; j < 4; ++j) out[j] += h * coef * (*k)[j];
  }
  return out;
}

inline Tangent to_tangent(const Vec4& f) { return {f[0], f[1], f[2], f[3]}; }

inline bool valid_vec(const ModelParameters& p, const Vec4& y, double guard) {
  return is_valid(p, PhaseState::from_array(y), guard);
}

inline double min_step(double t) { return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)); }

[[noreturn]] inline void step_underflow(double t, double h, const char* why) {
  std::ostringstream os;
  os.precision(17);
  os << "step size underflow (h=" << h << ") at t=" << t << ": " << why;
  throw StepFailure(os.str());
}

// Dormand-Prince 5(4): fifth-order solution, fourth-order embedded error estimate, FSAL.
struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline void integrate_adaptive(const ModelParameters& p, const IntegratorConfig& cfg, double t_end, Trajectory& traj) {
  using DP = DormandPrince;
  const double h_max = cfg.step_ceiling(p);
  const double guard = cfg.boundary_guard;

  double t = 0.0;
  Vec4 y = traj.back().state.to_array();
  Vec4 k1 = traj.back().rate.to_array();
  double h = std::min(h_max, t_end);
  bool last_rejected = false;

  while (t < t_end) {
    if (traj.stats().accepted + traj.stats().rejected >= cfg.max_steps) {
      throw StepFailure("max_steps exhausted before reaching t_end");
    }
    const bool final_step = h >= t_end - t;
    const double step = final_step ? t_end - t : h;

    auto reject = [&](double factor, const char* why) {
      ++traj.stats().rejected;
      last_rejected = true;
      h = step * factor;
      if (h < min_step(t)) step_underflow(t, h, why);
    };

    // Stage states may leave the sector when the step is far too long; treat that as a rejection.
    const Vec4 y2 = axpy(y, step, {{DP::a21, &k1}});
    if (!valid_vec(p, y2, guard)) { reject(0.5, "stage inside boundary guard band"); continue; }
    const Vec4 k2 = rhs(p, y2);
    const Vec4 y3 = axpy(y, step, {{DP::a31, &k1}, {DP::a32, &k2}});
    if (!valid_vec(p, y3, guard)) { reject(0.5, "stage inside boundary guard band"); continue; }
    const Vec4 k3 = rhs(p, y3);
    const Vec4 y4 = axpy(y, step, {{DP::a41, &k1}, {DP::a42, &k2}, {DP::a43, &k3}});
    if (!valid_vec(p, y4, guard)) { reject(0.5, "stage inside boundary guard band"); continue; }
    const Vec4 k4 = rhs(p, y4);
    const Vec4 y5 = axpy(y, step, {{DP::a51, &k1}, {DP::a52, &k2}, {DP::a53, &k3}, {DP::a54, &k4}});
    if (!valid_vec(p, y5, guard)) { reject(0.5, "stage inside boundary guard band"); continue; }
    const Vec4 k5 = rhs(p, y5);
    const Vec4 y6 = axpy(y, step, {{DP::a61, &k1}, {DP::a62, &k2}, {DP::a63, &k3}, {DP::a64, &k4}, {DP::a65, &k5}});
    if (!valid_vec(p, y6, guard)) { reject(0.5, "stage inside boundary guard band"); continue; }
    const Vec4 k6 = rhs(p, y6);
    const Vec4 y_new = axpy(y, step, {{DP::b1, &k1}, {DP::b3, &k3}, {DP::b4, &k4}, {DP::b5, &k5}, {DP::b6, &k6}});
    if (!valid_vec(p, y_new, guard)) { reject(0.5, "step lands inside boundary guard band"); continue; }
    const Vec4 k7 = rhs(p, y_new);

    double err = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double e = step * (DP::e1 * k1[j] + DP::e3 * k3[j] + DP::e4 * k4[j] + DP::e5 * k5[j] +
                               DP::e6 * k6[j] + DP::e7 * k7[j]);
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[j]), std::abs(y_new[j]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / 4.0);
    if (!std::isfinite(err)) { reject(0.5, "non-finite error estimate"); continue; }

    if (err > 1.0) {
      reject(std::max(0.2, 0.9 * std::pow(err, -0.2)), "error tolerance not met");
      continue;
    }

    t = final_step ? t_end : t + step;
    y = y_new;
    k1 = k7;
    ++traj.stats().accepted;
    traj.push(t, PhaseState::from_array(y), to_tangent(k7));

    double grow = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (last_rejected) grow = std::min(grow, 1.0);
    last_rejected = false;
    h = std::min(h_max, std::max(step, h) * grow);
  }
}

/// One implicit midpoint step y1 = y0 + h f((y0 + y1)/2) solved by fixed-point iteration.
inline std::optional<Vec4> midpoint_step(const ModelParameters& p, const IntegratorConfig& cfg, const Vec4& y0,
                                         const Vec4& f0, double h) {
  constexpr int kMaxIterations = 200;
  Vec4 y1 = axpy(y0, h, {{1.0, &f0}});
  for (int it = 0; it < kMaxIterations; ++it) {
    Vec4 mid{};
    for (std::size_t j = 0; j < 4; ++j) mid[j] = 0.5 * (y0[j] + y1[j]);
    if (!valid_vec(p, mid, cfg.boundary_guard)) return std::nullopt;
    const Vec4 f = rhs(p, mid);
    const Vec4 next = axpy(y0, h, {{1.0, &f}});
    double residual = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      residual = std::max(residual, std::abs(next[j] - y1[j]) / std::max(1.0, std::abs(next[j])));
    }
    y1 = next;
    if (!std::isfinite(residual)) return std::nullopt;
    if (residual <= cfg.midpoint_tol) {
      if (!valid_vec(p, y1, cfg.boundary_guard)) return std::nullopt;
      return y1;
    }
  }
  return std::nullopt;
}

/// Advances by h, halving recursively when the fixed-point solve fails or the guard band is hit.
inline Vec4 midpoint_advance(const ModelParameters& p, const IntegratorConfig& cfg, const Vec4& y0, double t,
                             double h, StepStats& stats) {
  const Vec4 f0 = rhs(p, y0);
  if (auto y1 = midpoint_step(p, cfg, y0, f0, h)) return *y1;
  ++stats.rejected;
  if (h / 2.0 < min_step(t)) step_underflow(t, h / 2.0, "implicit midpoint iteration failed near boundary");
  const Vec4 half = midpoint_advance(p, cfg, y0, t, h / 2.0, stats);
  return midpoint_advance(p, cfg, half, t + h / 2.0, h / 2.0, stats);
}

inline void integrate_midpoint(const ModelParameters& p, const IntegratorConfig& cfg, double t_end, Trajectory& traj) {
  Vec4 y = traj.back().state.to_array();
  std::int64_t step_index = 0;
  double t = 0.0;
  while (t < t_end) {
    if (traj.stats().accepted >= cfg.max_steps) throw StepFailure("max_steps exhausted before reaching t_end");
    // Times are computed from the step index so long runs do not accumulate roundoff in t.
    double t_next = static_cast<double>(step_index + 1) * cfg.dt;
    if (t_next > t_end || t_end - t_next < 1e-9 * cfg.dt) t_next = t_end;
    y = midpoint_advance(p, cfg, y, t, t_next - t, traj.stats());
    t = t_next;
    ++step_index;
    ++traj.stats().accepted;
    traj.push(t, PhaseState::from_array(y), to_tangent(rhs(p, y)));
  }
}

}  // namespace detail

/// Integrates Hamilton's equations from t = 0 to t_end. Every accepted step is stored.
inline Trajectory integrate(const ModelParameters& params, const PhaseState& state0, double t_end,
                            const IntegratorConfig& config = {}) {
  config.validate();
  validate(params, state0, config.boundary_guard);
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigurationError("t_end must be finite and nonnegative");

  Trajectory traj(params, config);
  traj.push(0.0, state0, detail::to_tangent(detail::rhs(params, state0.to_array())));
  if (t_end == 0.0) return traj;

  switch (config.scheme) {
    case Scheme::adaptive_embedded:
      detail::integrate_adaptive(params, config, t_end, traj);
      break;
    case Scheme::implicit_midpoint:
      detail::integrate_midpoint(params, config, t_end, traj);
      break;
  }
  return traj;
}

/// Final state after evolving `state` for `duration`.
inline PhaseState propagate(const ModelParameters& params, const PhaseState& state, double duration,
                            const IntegratorConfig& config = {}) {
  return integrate(params, state, duration, config).back().state;
}

inline PhaseState Trajectory::reintegrate(double t) const {
  if (samples_.empty()) throw ConfigurationError("reintegrate on empty trajectory");
  const std::size_t i = segment_index(t);
  const Sample& start = samples_[i];
  if (t <= start.t) return start.state;
  return propagate(params_, start.state, t - start.t, config_);
}

struct EnergyRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Energy band [lo_factor, hi_factor] x (lowest admissible energy); convenient for sampling across k.
inline EnergyRange relative_energy_range(const ModelParameters& params, double lo_factor = 1.5,
                                         double hi_factor = 3.0) {
  const double e0 = minimum_energy(params);
  return {lo_factor * e0, hi_factor * e0};
}

/// Normalized admissibility margins a sampled state must clear to count as generic.
inline constexpr double kSamplerMargin = 1e-2;

/// Deterministic rejection sampler for bounded, non-degenerate initial conditions.
///
/// Candidates are drawn uniformly from the box that the torus equations allow
/// for E <= E_hi: w^2 r^2 <= E, A_min / r^2 <= E, p_r^2 <= E, p_phi^2 <= E r^2.
inline PhaseState sample_admissible_state(const ModelParameters& params, std::uint64_t seed, EnergyRange range,
                                          std::int64_t max_attempts = 2'000'000) {
  if (!(range.lo > 0.0) || !(range.hi >= range.lo)) throw ConfigurationError("energy range must satisfy 0 < lo <= hi");
  if (range.hi <= minimum_energy(params)) {
    throw ConfigurationError("energy range lies below the lowest admissible energy 2 w k (sqrt a + sqrt b)");
  }
  const double w = params.omega();
  const double a_min = minimum_angular_integral(params);
  const double width = params.sector_width();
  const double e_hi = range.hi;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> r_dist(std::sqrt(a_min / e_hi), std::sqrt(e_hi) / w);
  std::uniform_real_distribution<double> phi_dist(1e-3 * width, (1.0 - 1e-3) * width);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  for (std::int64_t attempt = 0; attempt < max_attempts; ++attempt) {
    PhaseState s;
    s.r = r_dist(rng);
    s.phi = phi_dist(rng);
    s.p_r = unit(rng) * std::sqrt(e_hi);
    s.p_phi = unit(rng) * std::sqrt(e_hi) * s.r;
    if (!is_valid(params, s)) continue;

    const double E = detail::hamiltonian(params, s);
    if (E < range.lo || E > range.hi) continue;
    const double A = detail::angular_integral(params, s);
    const AdmissibilityReport adm = admissibility(params, E, A);
    if (!adm.admissible) continue;
    if (adm.angular_margin < kSamplerMargin * A || adm.radial_margin < kSamplerMargin * E * E ||
        adm.angular_discriminant < kSamplerMargin * A * A) {
      continue;
    }
    return s;
  }
  throw ExhaustionError("sample_admissible_state: no admissible state found within the attempt budget");
}

}  // namespace ttw

#endif  // TTW_DYNAMICS_HPP
