#ifndef TTW_MODEL_HPP
#define TTW_MODEL_HPP

// Closed-form quantities of the TTW oscillator
//
//   H = p_r^2 + p_phi^2/r^2 + w^2 r^2 + a k^2/(r^2 cos^2 k phi) + b k^2/(r^2 sin^2 k phi)
//
// on the sector 0 < phi < pi/(2k). There is no factor 1/2 in the kinetic term,
// so dr/dt = 2 p_r.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "ttw/errors.hpp"

namespace ttw {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Angular distance from either sector wall below which a state is rejected.
inline constexpr double kDefaultGuard = 1e-10;

struct Rational {
  long long num = 1;
  long long den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Physical constants (w, a, b) and the deformation k.
///
/// k is either a reduced fraction m/n (rational mode, where the superintegral
/// C = f1^m f2^n exists) or a bare real number (irrational mode, used for
/// non-recurrence counter-tests).
class ModelParameters {
 public:
  static ModelParameters rational(double omega, double alpha, double beta, long long m, long long n) {
    if (m <= 0 || n <= 0) throw ConfigurationError("k = m/n requires positive integers m, n");
    const long long g = std::gcd(m, n);
    ModelParameters p(omega, alpha, beta, static_cast<double>(m / g) / static_cast<double>(n / g));
    p.ratio_ = Rational{m / g, n / g};
    return p;
  }

  static ModelParameters irrational(double omega, double alpha, double beta, double k) {
    return ModelParameters(omega, alpha, beta, k);
  }

  double omega() const { return omega_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double k() const { return k_; }

  bool is_rational() const { return ratio_.has_value(); }
  const std::optional<Rational>& ratio() const { return ratio_; }

  long long m() const { return require_ratio().num; }
  long long n() const { return require_ratio().den; }

  /// Width pi/(2k) of the configuration sector.
  double sector_width() const { return kPi / (2.0 * k_); }

  std::string k_string() const {
    std::ostringstream os;
    if (ratio_) {
      os << ratio_->num << '/' << ratio_->den;
    } else {
      os.precision(17);
      os << k_;
    }
    return os.str();
  }

 private:
  ModelParameters(double omega, double alpha, double beta, double k)
      : omega_(omega), alpha_(alpha), beta_(beta), k_(k) {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigurationError("omega must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigurationError("alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigurationError("beta must be positive");
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigurationError("k must be positive");
  }

  const Rational& require_ratio() const {
    if (!ratio_) {
      throw ConfigurationError("superintegral requires rational k = m/n; k = " + k_string() +
                               " is irrational and the trajectory covers its torus densely");
    }
    return *ratio_;
  }

  double omega_;
  double alpha_;
  double beta_;
  double k_;
  std::optional<Rational> ratio_;
};

/// Point (r, phi, p_r, p_phi) of the four-dimensional phase space.
struct PhaseState {
  double r = 1.0;
  double phi = 0.0;
  double p_r = 0.0;
  double p_phi = 0.0;

  std::array<double, 4> to_array() const { return {r, phi, p_r, p_phi}; }
  static PhaseState from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

/// Time derivative of a PhaseState under Hamilton's equations.
struct Tangent {
  double dr = 0.0;
  double dphi = 0.0;
  double dp_r = 0.0;
  double dp_phi = 0.0;

  std::array<double, 4> to_array() const { return {dr, dphi, dp_r, dp_phi}; }
};

struct InvariantSet {
  double E = 0.0;
  double A = 0.0;
  Complex f1;
  Complex f2;
  std::optional<Complex> C;  // empty in irrational mode
};

struct ActionPair {
  double I1 = 0.0;
  double I2 = 0.0;
};

/// Angle rates of the action-angle flow; isochronous, so state independent.
struct Frequencies {
  double radial = 0.0;
  double angular = 0.0;
};

/// Signed margins of the three bounded-motion conditions.
struct AdmissibilityReport {
  bool admissible = false;
  bool on_boundary = false;       // some margin is zero to roundoff
  double angular_margin = 0.0;    // A - k^2 (sqrt a + sqrt b)^2        >= 0
  double radial_margin = 0.0;     // E^2 - 4 w^2 A                      >= 0
  double angular_discriminant = 0.0;  // (A + (b-a) k^2)^2 - 4 k^2 b A  >  0
};

/// Binary exponentiation by repeated complex multiplication; no logarithms, no branch cuts.
inline Complex complex_power(Complex base, long long exponent) {
  if (exponent < 0) throw ConfigurationError("complex_power: negative exponent");
  Complex result{1.0, 0.0};
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

inline bool is_valid(const ModelParameters& params, const PhaseState& s, double guard = kDefaultGuard) {
  return std::isfinite(s.r) && std::isfinite(s.phi) && std::isfinite(s.p_r) && std::isfinite(s.p_phi) &&
         s.r > 0.0 && s.phi > guard && s.phi < params.sector_width() - guard;
}

inline void validate(const ModelParameters& params, const PhaseState& s, double guard = kDefaultGuard) {
  if (is_valid(params, s, guard)) return;
  std::ostringstream os;
  os.precision(17);
  os << "state (r=" << s.r << ", phi=" << s.phi << ", p_r=" << s.p_r << ", p_phi=" << s.p_phi
     << ") is outside the open sector 0 < phi < " << params.sector_width() << " (guard " << guard
     << ") or has r <= 0";
  throw DomainError(os.str());
}

namespace detail {

/// a k^2 / cos^2(k phi) + b k^2 / sin^2(k phi)
inline double angular_potential(const ModelParameters& p, double phi) {
  const double k = p.k();
  const double c = std::cos(k * phi);
  const double s = std::sin(k * phi);
  return k * k * (p.alpha() / (c * c) + p.beta() / (s * s));
}

/// d/dphi of angular_potential.
inline double angular_potential_slope(const ModelParameters& p, double phi) {
  const double k = p.k();
  const double c = std::cos(k * phi);
  const double s = std::sin(k * phi);
  return 2.0 * k * k * k * (p.alpha() * s / (c * c * c) - p.beta() * c / (s * s * s));
}

inline double angular_integral(const ModelParameters& p, const PhaseState& s) {
  return s.p_phi * s.p_phi + angular_potential(p, s.phi);
}

inline double hamiltonian(const ModelParameters& p, const PhaseState& s) {
  const double w = p.omega();
  return s.p_r * s.p_r + angular_integral(p, s) / (s.r * s.r) + w * w * s.r * s.r;
}

/// Hamilton's equations without domain checks; the integrators screen stage states themselves.
inline std::array<double, 4> rhs(const ModelParameters& p, const std::array<double, 4>& y) {
  const double r = y[0];
  const double phi = y[1];
  const double p_r = y[2];
  const double p_phi = y[3];
  const double w = p.omega();
  const double r2 = r * r;
  const double r3 = r2 * r;
  const double barrier = angular_potential(p, phi);
  return {2.0 * p_r, 2.0 * p_phi / r2, 2.0 * (p_phi * p_phi + barrier) / r3 - 2.0 * w * w * r,
          -angular_potential_slope(p, phi) / r2};
}

}  // namespace detail

inline double hamiltonian(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  return detail::hamiltonian(params, state);
}

/// Separation constant A = p_phi^2 + a k^2/cos^2(k phi) + b k^2/sin^2(k phi); commutes with H.
inline double angular_integral(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  return detail::angular_integral(params, state);
}

inline Tangent eom_rhs(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  const auto d = detail::rhs(params, state.to_array());
  return {d[0], d[1], d[2], d[3]};
}

/// Smallest value of A on the sector, reached at p_phi = 0 and tan^2(k phi) = sqrt(b/a).
inline double minimum_angular_integral(const ModelParameters& params) {
  const double k = params.k();
  const double s = std::sqrt(params.alpha()) + std::sqrt(params.beta());
  return k * k * s * s;
}

/// Angle at which the angular barrier is smallest: tan^4(k phi) = b/a.
inline double barrier_minimum_angle(const ModelParameters& params) {
  return std::atan(std::pow(params.beta() / params.alpha(), 0.25)) / params.k();
}

/// Lowest admissible energy, 2 w sqrt(A_min) (I1 = 0 on the smallest torus).
inline double minimum_energy(const ModelParameters& params) {
  return 2.0 * params.omega() * std::sqrt(minimum_angular_integral(params));
}

namespace detail {

inline Complex radial_factor(const ModelParameters& /*p*/, const PhaseState& s, double E, double A) {
  return {2.0 * std::sqrt(A) * s.p_r / s.r, E - 2.0 * A / (s.r * s.r)};
}

inline Complex angular_factor(const ModelParameters& p, const PhaseState& s, double A) {
  const double k = p.k();
  return {std::sqrt(A) * s.p_phi * std::sin(2.0 * k * s.phi),
          (p.beta() - p.alpha()) * k * k + A * std::cos(2.0 * k * s.phi)};
}

inline Complex superintegral(const ModelParameters& p, const PhaseState& s) {
  const double A = detail::angular_integral(p, s);
  const double E = detail::hamiltonian(p, s);
  return complex_power(detail::radial_factor(p, s, E, A), p.m()) * complex_power(detail::angular_factor(p, s, A), p.n());
}

}  // namespace detail

/// f1 = 2 sqrt(A) p_r / r + i (E - 2A/r^2); |f1|^2 = E^2 - 4 w^2 A.
inline Complex radial_factor(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  return detail::radial_factor(params, state, detail::hamiltonian(params, state),
                               detail::angular_integral(params, state));
}

/// f2 = sqrt(A) p_phi sin(2k phi) + i ((b - a) k^2 + A cos(2k phi)).
inline Complex angular_factor(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  return detail::angular_factor(params, state, detail::angular_integral(params, state));
}

/// C = f1^m f2^n. Throws ConfigurationError in irrational mode.
inline Complex superintegral(const ModelParameters& params, const PhaseState& state) {
  params.m();  // mode check before touching the state
  validate(params, state);
  return detail::superintegral(params, state);
}

/// C evaluated at A = 0: i^(m+n) E^m ((b - a) k^2)^n.
inline Complex superintegral_at_zero_A(const ModelParameters& params, double E) {
  const long long m = params.m();
  const long long n = params.n();
  const double k = params.k();
  static constexpr std::array<Complex, 4> kIPowers{Complex{1, 0}, Complex{0, 1}, Complex{-1, 0}, Complex{0, -1}};
  const Complex unit = kIPowers[static_cast<std::size_t>((m + n) % 4)];
  return unit * std::pow(E, static_cast<double>(m)) *
         std::pow((params.beta() - params.alpha()) * k * k, static_cast<double>(n));
}

inline InvariantSet evaluate_invariants(const ModelParameters& params, const PhaseState& state) {
  validate(params, state);
  InvariantSet out;
  out.E = detail::hamiltonian(params, state);
  out.A = detail::angular_integral(params, state);
  out.f1 = detail::radial_factor(params, state, out.E, out.A);
  out.f2 = detail::angular_factor(params, state, out.A);
  if (params.is_rational()) {
    out.C = complex_power(out.f1, params.m()) * complex_power(out.f2, params.n());
  }
  return out;
}

inline AdmissibilityReport admissibility(const ModelParameters& params, double E, double A) {
  const double k = params.k();
  const double w = params.omega();
  AdmissibilityReport rep;
  rep.angular_margin = A - minimum_angular_integral(params);
  rep.radial_margin = E * E - 4.0 * w * w * A;
  const double shifted = A + (params.beta() - params.alpha()) * k * k;
  rep.angular_discriminant = shifted * shifted - 4.0 * k * k * params.beta() * A;
  rep.admissible = rep.angular_margin >= 0.0 && rep.radial_margin >= 0.0 && rep.angular_discriminant > 0.0;

  constexpr double kRoundoff = 1e-12;
  const double a_scale = std::max(std::abs(A), minimum_angular_integral(params));
  rep.on_boundary = std::abs(rep.angular_margin) <= kRoundoff * a_scale ||
                    std::abs(rep.radial_margin) <= kRoundoff * std::max(E * E, 4.0 * w * w * std::abs(A)) ||
                    std::abs(rep.angular_discriminant) <= kRoundoff * std::max(shifted * shifted, 1.0);
  return rep;
}

/// I1 = E/(4w) - sqrt(A)/2, I2 = sqrt(A)/(2k).
inline ActionPair actions_from_invariants(const ModelParameters& params, double E, double A) {
  if (!(A >= 0.0)) throw AdmissibilityError("angular invariant A must be nonnegative");
  const double w = params.omega();
  const double root = std::sqrt(A);
  if (E < 2.0 * w * root) {
    std::ostringstream os;
    os.precision(17);
    os << "E = " << E << " is below 2 w sqrt(A) = " << 2.0 * w * root << "; radial action would be negative";
    throw AdmissibilityError(os.str());
  }
  return {E / (4.0 * w) - root / 2.0, root / (2.0 * params.k())};
}

/// H = 4 w (I1 + k I2): the energy is linear in the actions.
inline double energy_from_actions(const ModelParameters& params, const ActionPair& actions) {
  return 4.0 * params.omega() * (actions.I1 + params.k() * actions.I2);
}

inline Frequencies fundamental_frequencies(const ModelParameters& params) {
  return {4.0 * params.omega(), 4.0 * params.omega() * params.k()};
}

}  // namespace ttw

#endif  // TTW_MODEL_HPP
