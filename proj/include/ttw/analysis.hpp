#ifndef TTW_ANALYSIS_HPP
#define TTW_ANALYSIS_HPP

// Measurements that turn the integrability claims into numbers: drift of the
// conserved quantities, finite-difference Poisson brackets, radial period,
// phase-space recurrence and the rotation rates of arg f1, arg f2.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ttw/dynamics.hpp"
#include "ttw/model.hpp"

namespace ttw {

struct QuantityDrift {
  std::string name;
  double initial = 0.0;
  double max_abs_deviation = 0.0;
  /// Deviation over the reference scale: |initial| for E, A, |f1|^2, |f2|^2 and
  /// |C(0)| for both parts of C. Equals the absolute deviation when the scale is 0.
  double max_rel_deviation = 0.0;
};

struct DriftReport {
  std::vector<QuantityDrift> quantities;
  /// Worst relative violation of |f1|^2 = E^2 - 4w^2 A and its angular twin over all samples.
  double modulus_identity_residual = 0.0;
  std::size_t samples = 0;

  const QuantityDrift* find(const std::string& name) const {
    for (const auto& q : quantities) {
      if (q.name == name) return &q;
    }
    return nullptr;
  }

  double max_rel_deviation() const {
    double worst = 0.0;
    for (const auto& q : quantities) worst = std::max(worst, q.max_rel_deviation);
    return worst;
  }
};

/// Drift of E, A, Re C, Im C, |f1|^2, |f2|^2 along a trajectory (C omitted for irrational k).
inline DriftReport drift_report(const ModelParameters& params, const Trajectory& trajectory) {
  if (trajectory.empty()) throw ConfigurationError("drift_report: empty trajectory");

  const InvariantSet first = evaluate_invariants(params, trajectory.front().state);
  const double c_scale = first.C ? std::abs(*first.C) : 0.0;

  struct Track {
    QuantityDrift drift;
    double scale;
  };
  std::vector<Track> tracks{
      {{"E", first.E}, std::abs(first.E)},
      {{"A", first.A}, std::abs(first.A)},
      {{"abs_f1_sq", std::norm(first.f1)}, std::norm(first.f1)},
      {{"abs_f2_sq", std::norm(first.f2)}, std::norm(first.f2)},
  };
  if (first.C) {
    tracks.push_back({{"re_c", first.C->real()}, c_scale});
    tracks.push_back({{"im_c", first.C->imag()}, c_scale});
  }

  DriftReport report;
  const double w2 = params.omega() * params.omega();
  const double k2 = params.k() * params.k();
  const double shift = (params.beta() - params.alpha()) * k2;
  for (const Sample& sample : trajectory.samples()) {
    const InvariantSet inv = evaluate_invariants(params, sample.state);
    std::array<double, 6> values{inv.E, inv.A, std::norm(inv.f1), std::norm(inv.f2), 0.0, 0.0};
    if (inv.C) {
      values[4] = inv.C->real();
      values[5] = inv.C->imag();
    }
    for (std::size_t q = 0; q < tracks.size(); ++q) {
      auto& d = tracks[q].drift;
      d.max_abs_deviation = std::max(d.max_abs_deviation, std::abs(values[q] - d.initial));
    }

    const double radial = inv.E * inv.E - 4.0 * w2 * inv.A;
    const double angular = (inv.A + shift) * (inv.A + shift) - 4.0 * k2 * params.beta() * inv.A;
    const double r1 = std::abs(std::norm(inv.f1) - radial) / std::max(inv.E * inv.E, 4.0 * w2 * inv.A);
    const double r2 = std::abs(std::norm(inv.f2) - angular) /
                      std::max((inv.A + shift) * (inv.A + shift), 4.0 * k2 * params.beta() * inv.A);
    report.modulus_identity_residual = std::max({report.modulus_identity_residual, r1, r2});
  }
  for (auto& t : tracks) {
    t.drift.max_rel_deviation = t.scale > 0.0 ? t.drift.max_abs_deviation / t.scale : t.drift.max_abs_deviation;
    report.quantities.push_back(t.drift);
  }
  report.samples = trajectory.size();
  return report;
}

using PhaseFunction = std::function<double(const PhaseState&)>;

/// Poisson bracket value with the scale |grad F| |grad G| needed for a relative residual.
struct BracketValue {
  double value = 0.0;
  double normalization = 0.0;

  double normalized() const { return std::abs(value) / normalization; }
};

/// Central-difference gradient (d/dr, d/dphi, d/dp_r, d/dp_phi) with one Richardson level.
/// Step per coordinate is h_scale * max(1, |x|).
template <class F>
std::array<double, 4> numeric_gradient(F&& f, const PhaseState& state, double h_scale = 1e-5) {
  const auto x = state.to_array();
  std::array<double, 4> grad{};
  for (std::size_t j = 0; j < 4; ++j) {
    const double h = h_scale * std::max(1.0, std::abs(x[j]));
    auto central = [&](double step) {
      auto plus = x;
      auto minus = x;
      plus[j] += step;
      minus[j] -= step;
      return (f(PhaseState::from_array(plus)) - f(PhaseState::from_array(minus))) / (2.0 * step);
    };
    const double coarse = central(h);
    const double fine = central(h / 2.0);
    grad[j] = (4.0 * fine - coarse) / 3.0;
  }
  return grad;
}

/// {F, G} = F_r G_pr - F_pr G_r + F_phi G_pphi - F_pphi G_phi.
template <class F, class G>
BracketValue poisson_bracket(F&& f, G&& g, const PhaseState& state, double h_scale = 1e-5) {
  const auto df = numeric_gradient(f, state, h_scale);
  const auto dg = numeric_gradient(g, state, h_scale);
  BracketValue out;
  out.value = df[0] * dg[2] - df[2] * dg[0] + df[1] * dg[3] - df[3] * dg[1];
  double nf = 0.0;
  double ng = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    nf += df[j] * df[j];
    ng += dg[j] * dg[j];
  }
  out.normalization = std::sqrt(nf) * std::sqrt(ng);
  if (!(out.normalization > 0.0) || !std::isfinite(out.normalization)) {
    throw IllConditionedError("poisson_bracket: vanishing or non-finite gradient at the evaluation point");
  }
  return out;
}

/// Checked variant: rejects states closer than 4h to the sector walls.
template <class F, class G>
BracketValue poisson_bracket(const ModelParameters& params, F&& f, G&& g, const PhaseState& state,
                             double h_scale = 1e-5) {
  validate(params, state);
  const double h_phi = h_scale * std::max(1.0, std::abs(state.phi));
  const double h_r = h_scale * std::max(1.0, std::abs(state.r));
  if (state.phi - kDefaultGuard <= 4.0 * h_phi || params.sector_width() - kDefaultGuard - state.phi <= 4.0 * h_phi ||
      state.r <= 4.0 * h_r) {
    throw DomainError("poisson_bracket: state within 4h of the guard band");
  }
  return poisson_bracket(std::forward<F>(f), std::forward<G>(g), state, h_scale);
}

namespace detail {

/// Root of g on [a, b] given a sign change; plain bisection to roundoff.
template <class Fn>
double bisect(Fn&& g, double a, double b) {
  double ga = g(a);
  for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0.0) == (ga < 0.0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

/// Minimizer of f on [a, b] by golden-section search.
template <class Fn>
double golden_minimize(Fn&& f, double a, double b, int iterations = 80) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < iterations && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace detail

/// Fundamental period of u(t) = r(t)^2.
///
/// Along the flow u obeys u'' + 16 w^2 u = 8E, so the exact answer is pi/(2w).
/// Up- and down-crossings of u - mean(u) are refined by re-integrating from
/// the preceding sample, and each family is fitted separately; an error in the mean shifts the two
/// families in opposite directions but leaves their spacing intact.
inline double estimate_radial_period(const Trajectory& trajectory) {
  const auto& samples = trajectory.samples();
  if (samples.size() < 3) throw InsufficientSpanError("estimate_radial_period: trajectory too short");

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double ua = samples[i].state.r * samples[i].state.r;
    const double ub = samples[i + 1].state.r * samples[i + 1].state.r;
    area += 0.5 * (ua + ub) * (samples[i + 1].t - samples[i].t);
  }
  const double mean = area / trajectory.duration();

  auto excess = [&](double t) {
    const double r = trajectory.reintegrate(t).r;
    return r * r - mean;
  };

  std::vector<double> up;
  std::vector<double> down;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double ga = samples[i].state.r * samples[i].state.r - mean;
    const double gb = samples[i + 1].state.r * samples[i + 1].state.r - mean;
    if (ga < 0.0 && gb >= 0.0) up.push_back(detail::bisect(excess, samples[i].t, samples[i + 1].t));
    if (ga > 0.0 && gb <= 0.0) down.push_back(detail::bisect(excess, samples[i].t, samples[i + 1].t));
  }
  if (up.size() + down.size() < 6 || up.size() < 2 || down.size() < 2) {
    throw InsufficientSpanError("estimate_radial_period: fewer than three radial oscillations recorded");
  }
  auto family_period = [](const std::vector<double>& times) {
    std::vector<double> idx(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) idx[i] = static_cast<double>(i);
    return detail::fit_slope(idx, times);
  };
  const double pu = family_period(up);
  const double pd = family_period(down);
  const double wu = static_cast<double>(up.size() - 1);
  const double wd = static_cast<double>(down.size() - 1);
  return (wu * pu + wd * pd) / (wu + wd);
}

/// Weighted phase-space distance used for recurrence detection:
///   d^2 = (dr/r0)^2 + (dphi 2k/pi)^2 + (dp_r/sqrt E)^2 + (dp_phi/sqrt E)^2
/// with r0 and E taken at the reference state.
class PhaseDistance {
 public:
  PhaseDistance(const ModelParameters& params, const PhaseState& reference)
      : ref_(reference),
        angle_weight_(2.0 * params.k() / kPi),
        p_scale_(std::sqrt(detail::hamiltonian(params, reference))) {}

  double operator()(const PhaseState& s) const {
    const double c = configuration(s);
    const double dpr = (s.p_r - ref_.p_r) / p_scale_;
    const double dpp = (s.p_phi - ref_.p_phi) / p_scale_;
    return std::sqrt(c * c + dpr * dpr + dpp * dpp);
  }

  /// Same norm restricted to (r, phi).
  double configuration(const PhaseState& s) const {
    const double dr = (s.r - ref_.r) / ref_.r;
    const double dphi = (s.phi - ref_.phi) * angle_weight_;
    return std::sqrt(dr * dr + dphi * dphi);
  }

  static constexpr const char* kDescription =
      "sqrt((dr/r0)^2 + (dphi*2k/pi)^2 + (dp_r/sqrt(E0))^2 + (dp_phi/sqrt(E0))^2)";

 private:
  PhaseState ref_;
  double angle_weight_;
  double p_scale_;
};

struct ClosureReport {
  std::optional<double> recurrence_time;  // earliest return below tol
  double min_return_distance = 0.0;
  double min_return_time = 0.0;
  std::optional<double> predicted_time;  // n pi / (2w), rational mode only
  std::optional<double> configuration_closure_time;
  double configuration_min_distance = 0.0;
  double configuration_min_time = 0.0;
  double horizon = 0.0;
  double tol = 0.0;
  std::string phase_distance_metric = PhaseDistance::kDescription;
};

/// Joint period of the two angle rates 4w and 4wk when k = m/n.
inline double predicted_recurrence_time(const ModelParameters& params) {
  return static_cast<double>(params.n()) * kPi / (2.0 * params.omega());
}

/// Integrates from state0 over [0, horizon] and scans for returns to state0.
///
/// Local minima of the sampled distance (after the first departure maximum)
/// are located on the dense output. Near-returns are then re-minimized on
/// states re-integrated from the preceding sample, so the reported distance
/// carries integrator accuracy rather than interpolation error.
inline ClosureReport detect_closure(const ModelParameters& params, const PhaseState& state0, double horizon, double tol,
                                    const IntegratorConfig& config = {}) {
  if (!(tol > 0.0)) throw ConfigurationError("detect_closure: tol must be positive");
  ClosureReport report;
  report.horizon = horizon;
  report.tol = tol;
  if (params.is_rational()) {
    report.predicted_time = predicted_recurrence_time(params);
    if (horizon < *report.predicted_time) {
      throw ConfigurationError("detect_closure: horizon shorter than the predicted recurrence time n pi/(2w)");
    }
  }

  const Trajectory traj = integrate(params, state0, horizon, config);
  const auto& samples = traj.samples();
  const PhaseDistance metric(params, state0);

  std::vector<double> d(samples.size());
  std::vector<double> dc(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d[i] = metric(samples[i].state);
    dc[i] = metric.configuration(samples[i].state);
  }

  report.min_return_distance = std::numeric_limits<double>::infinity();
  report.configuration_min_distance = std::numeric_limits<double>::infinity();

  // Candidates whose interpolated distance is below this are re-minimized on the exact flow.
  const double refine_below = std::max(1e-3, 100.0 * tol);

  auto scan = [&](const std::vector<double>& dist, auto&& measure, std::optional<double>& first_time,
                  double& best, double& best_time) {
    std::size_t start = 1;
    while (start + 1 < dist.size() && !(dist[start] >= dist[start - 1] && dist[start] > dist[start + 1])) ++start;
    for (std::size_t i = start + 1; i < dist.size(); ++i) {
      const bool last = i + 1 == dist.size();
      const bool is_min = dist[i] <= dist[i - 1] && (last || dist[i] <= dist[i + 1]);
      if (!is_min) continue;
      const double a = samples[i - 1].t;
      const double b = last ? samples[i].t : samples[i + 1].t;
      double t_min = detail::golden_minimize([&](double t) { return measure(traj.interpolate(t)); }, a, b);
      if (measure(traj.interpolate(t_min)) < refine_below) {
        t_min = detail::golden_minimize([&](double t) { return measure(traj.reintegrate(t)); }, a, b);
      }
      const double value = measure(traj.reintegrate(t_min));
      if (value < best) {
        best = value;
        best_time = t_min;
      }
      if (value < tol && !first_time) first_time = t_min;
    }
  };

  scan(d, metric, report.recurrence_time, report.min_return_distance, report.min_return_time);
  scan(dc, [&](const PhaseState& s) { return metric.configuration(s); }, report.configuration_closure_time,
       report.configuration_min_distance, report.configuration_min_time);
  return report;
}

struct PhaseRates {
  double radial = 0.0;   // d arg f1 / dt
  double angular = 0.0;  // d arg f2 / dt
  std::optional<double> weighted_sum;  // m radial + n angular, zero when C is conserved
};

/// Mean rotation rates of arg f1 and arg f2 along a trajectory.
///
/// The phases are not uniform in t, but the times at which the unwrapped phase
/// completes whole turns repeat with the underlying period; the rate is the
/// turn count over the fitted spacing of those times.
inline PhaseRates phase_rotation_check(const ModelParameters& params, const Trajectory& trajectory) {
  const auto& samples = trajectory.samples();
  if (samples.size() < 3) throw InsufficientSpanError("phase_rotation_check: trajectory too short");
  constexpr double kDegenerate = 1e-9;

  auto factor = [&](const PhaseState& s, int which) {
    return which == 1 ? radial_factor(params, s) : angular_factor(params, s);
  };

  auto fitted_rate = [&](int which, long long stride) {
    std::vector<double> unwrapped(samples.size());
    std::vector<double> raw(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Complex f = factor(samples[i].state, which);
      if (std::abs(f) < kDegenerate) {
        throw DegenerateOrbitError("phase_rotation_check: |f" + std::to_string(which) + "| below 1e-9, phase undefined");
      }
      raw[i] = std::arg(f);
      if (i == 0) {
        unwrapped[i] = raw[i];
        continue;
      }
      const double inc = detail::wrap_angle(raw[i] - raw[i - 1]);
      if (std::abs(inc) > kPi / 2.0) {
        throw NumericalError("phase_rotation_check: phase increment above pi/2 between samples; lower the step ceiling");
      }
      unwrapped[i] = unwrapped[i - 1] + inc;
    }
    const double total = unwrapped.back() - unwrapped.front();
    const double sign = total >= 0.0 ? 1.0 : -1.0;

    std::vector<double> turns{0.0};
    std::vector<double> times{samples.front().t};
    int next = 1;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      while (true) {
        const double level = unwrapped.front() + sign * 2.0 * kPi * next;
        const double ga = sign * (unwrapped[i] - level);
        const double gb = sign * (unwrapped[i + 1] - level);
        if (!(ga < 0.0 && gb >= 0.0)) break;
        auto g = [&](double t) {
          const double phase = unwrapped[i] + detail::wrap_angle(std::arg(factor(trajectory.reintegrate(t), which)) - raw[i]);
          return sign * (phase - level);
        };
        if (next % stride == 0) {
          times.push_back(detail::bisect(g, samples[i].t, samples[i + 1].t));
          turns.push_back(static_cast<double>(next));
        }
        ++next;
      }
    }
    if (turns.size() < 3) {
      throw InsufficientSpanError("phase_rotation_check: fewer than two complete phase periods recorded");
    }
    return sign * 2.0 * kPi / detail::fit_slope(turns, times);
  };

  PhaseRates rates;
  // f1 depends on the radial motion alone, so every winding of arg f1 takes one
  // radial period. arg f2 is slaved to 1/r^2 and its windings are evenly spaced
  // only every m turns (one joint period n pi/(2w)); in irrational mode all
  // windings are used and the fit is approximate.
  rates.radial = fitted_rate(1, 1);
  rates.angular = fitted_rate(2, params.is_rational() ? params.m() : 1);
  if (params.is_rational()) {
    rates.weighted_sum = static_cast<double>(params.m()) * rates.radial + static_cast<double>(params.n()) * rates.angular;
  }
  return rates;
}

}  // namespace ttw

#endif  // TTW_ANALYSIS_HPP
