#ifndef TTW_POLYINT_HPP
#define TTW_POLYINT_HPP

// Reduction of the superintegral to a polynomial in the momenta.
//
// Re C and Im C each contain only even or only odd powers of sqrt(A), and the
// A-free term of C is i^(m+n) E^m ((b-a) k^2)^n. Subtracting it from the part
// with even powers and dividing by A leaves
//
//   G = (Re C - Re C(A=0)) / A    for m+n even,
//   G = (Im C - Im C(A=0)) / A    for m+n odd,
//
// a conserved polynomial of degree 2(m+n-1) in (p_r, p_phi). Polynomiality is
// certified by finite differences: on a uniform grid every difference of total
// order d+1 annihilates a polynomial of degree d.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ttw/analysis.hpp"
#include "ttw/model.hpp"

namespace ttw {

enum class Parity { even, odd };

inline Parity reduction_parity(const ModelParameters& params) {
  return (params.m() + params.n()) % 2 == 0 ? Parity::even : Parity::odd;
}

inline int reduced_degree(const ModelParameters& params) {
  return static_cast<int>(2 * (params.m() + params.n() - 1));
}

/// G at a phase-space point; E inside C(A=0) is the energy of that point.
inline double reduced_integral(const ModelParameters& params, const PhaseState& state) {
  params.m();
  validate(params, state);
  const double E = detail::hamiltonian(params, state);
  const double A = detail::angular_integral(params, state);
  const Complex diff = detail::superintegral(params, state) - superintegral_at_zero_A(params, E);
  return (reduction_parity(params) == Parity::even ? diff.real() : diff.imag()) / A;
}

/// sqrt(A) times the part of C with odd powers of sqrt(A); also polynomial in the momenta.
inline double companion_integral(const ModelParameters& params, const PhaseState& state) {
  params.m();
  validate(params, state);
  const double A = detail::angular_integral(params, state);
  const Complex c = detail::superintegral(params, state);
  return std::sqrt(A) * (reduction_parity(params) == Parity::even ? c.imag() : c.real());
}

struct ConfigPoint {
  double r = 1.0;
  double phi = 0.0;
};

/// Uniform tensor grid in (p_r, p_phi) centered at the origin.
struct MomentumGrid {
  int nodes_r = 4;
  int nodes_phi = 4;
  double spacing = 0.5;

  /// Smallest grid that can certify degree d: d + 2 nodes per axis.
  static MomentumGrid for_degree(int d, double spacing = 0.5) { return {d + 2, d + 2, spacing}; }

  double node(int i, int count) const { return (static_cast<double>(i) - 0.5 * (count - 1)) * spacing; }
};

struct PolynomialSampleTable {
  ConfigPoint config_point;
  std::vector<double> p_r_nodes;
  std::vector<double> p_phi_nodes;
  std::vector<double> values;  // row-major: index i * p_phi_nodes.size() + j
  Parity parity = Parity::even;
  int claimed_degree = 0;

  std::size_t rows() const { return p_r_nodes.size(); }
  std::size_t cols() const { return p_phi_nodes.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
};

/// Tabulates an arbitrary phase-space function over a momentum grid at a fixed configuration.
template <class Fn>
PolynomialSampleTable sample_on_grid(const ModelParameters& params, const ConfigPoint& point, const MomentumGrid& grid,
                                     Fn&& fn) {
  if (grid.nodes_r < 1 || grid.nodes_phi < 1 || !(grid.spacing > 0.0)) {
    throw ConfigurationError("momentum grid needs positive node counts and spacing");
  }
  validate(params, PhaseState{point.r, point.phi, 0.0, 0.0});
  PolynomialSampleTable table;
  table.config_point = point;
  for (int i = 0; i < grid.nodes_r; ++i) table.p_r_nodes.push_back(grid.node(i, grid.nodes_r));
  for (int j = 0; j < grid.nodes_phi; ++j) table.p_phi_nodes.push_back(grid.node(j, grid.nodes_phi));
  table.values.reserve(table.rows() * table.cols());
  for (double pr : table.p_r_nodes) {
    for (double pp : table.p_phi_nodes) table.values.push_back(fn(PhaseState{point.r, point.phi, pr, pp}));
  }
  return table;
}

inline PolynomialSampleTable extract_reduced_integral(const ModelParameters& params, const ConfigPoint& point,
                                                      const MomentumGrid& grid) {
  auto table = sample_on_grid(params, point, grid, [&](const PhaseState& s) { return reduced_integral(params, s); });
  table.parity = reduction_parity(params);
  table.claimed_degree = reduced_degree(params);
  return table;
}

inline PolynomialSampleTable extract_reduced_integral(const ModelParameters& params, const ConfigPoint& point) {
  return extract_reduced_integral(params, point, MomentumGrid::for_degree(reduced_degree(params)));
}

struct DegreeReport {
  int degree = 0;
  double residual = 0.0;  // max |order d+1 difference| / max |G|
  double leading = 0.0;   // max |order d difference| / max |G|
  double scale = 0.0;
  bool degree_at_most = false;
  bool degree_exact = false;
};

inline constexpr double kDegreeResidualTol = 1e-8;
inline constexpr double kLeadingDifferenceTol = 1e-4;

namespace detail {

/// Max |D_r^i D_phi^j values| over all mixed orders with i + j = order.
inline double max_difference(const PolynomialSampleTable& table, int order) {
  const int rows = static_cast<int>(table.rows());
  const int cols = static_cast<int>(table.cols());
  double worst = 0.0;
  for (int i = 0; i <= order; ++i) {
    const int j = order - i;
    if (i >= rows || j >= cols) continue;
    std::vector<double> v = table.values;
    int nr = rows;
    int nc = cols;
    for (int step = 0; step < i; ++step) {
      for (int a = 0; a + 1 < nr; ++a) {
        for (int b = 0; b < nc; ++b) v[a * cols + b] = v[(a + 1) * cols + b] - v[a * cols + b];
      }
      --nr;
    }
    for (int step = 0; step < j; ++step) {
      for (int a = 0; a < nr; ++a) {
        for (int b = 0; b + 1 < nc; ++b) v[a * cols + b] = v[a * cols + b + 1] - v[a * cols + b];
      }
      --nc;
    }
    for (int a = 0; a < nr; ++a) {
      for (int b = 0; b < nc; ++b) worst = std::max(worst, std::abs(v[a * cols + b]));
    }
  }
  return worst;
}

}  // namespace detail

/// Certifies degree <= d (all order-(d+1) differences vanish) and degree == d
/// (some order-d difference survives).
inline DegreeReport verify_polynomial_degree(const PolynomialSampleTable& table, int d,
                                             double residual_tol = kDegreeResidualTol,
                                             double leading_tol = kLeadingDifferenceTol) {
  if (d < 0) throw ConfigurationError("degree must be nonnegative");
  if (table.rows() < static_cast<std::size_t>(d + 2) || table.cols() < static_cast<std::size_t>(d + 2)) {
    throw GridTooSmallError("verify_polynomial_degree: need at least d + 2 nodes per momentum axis");
  }
  DegreeReport rep;
  rep.degree = d;
  for (double v : table.values) rep.scale = std::max(rep.scale, std::abs(v));
  if (rep.scale == 0.0) {
    rep.degree_at_most = true;
    return rep;
  }
  rep.residual = detail::max_difference(table, d + 1) / rep.scale;
  rep.leading = detail::max_difference(table, d) / rep.scale;
  rep.degree_at_most = rep.residual < residual_tol;
  rep.degree_exact = rep.degree_at_most && rep.leading > leading_tol;
  return rep;
}

struct BracketResidualReport {
  std::vector<double> residuals;
  double max_residual = 0.0;
};

/// Normalized {G, H} at each state.
inline BracketResidualReport verify_reduced_bracket(const ModelParameters& params, std::span<const PhaseState> states) {
  BracketResidualReport rep;
  auto g = [&](const PhaseState& s) { return reduced_integral(params, s); };
  auto h = [&](const PhaseState& s) { return hamiltonian(params, s); };
  for (const PhaseState& s : states) {
    const double r = poisson_bracket(params, g, h, s).normalized();
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
  }
  return rep;
}

/// Singular values (descending) of the 3x4 matrix of gradients of H, A, G,
/// each row scaled to unit length. Three nonzero values mean the integrals
/// are functionally independent at the state.
inline std::array<double, 3> gradient_singular_values(const ModelParameters& params, const PhaseState& state) {
  const std::array<PhaseFunction, 3> fns{
      [&](const PhaseState& s) { return hamiltonian(params, s); },
      [&](const PhaseState& s) { return angular_integral(params, s); },
      [&](const PhaseState& s) { return reduced_integral(params, s); },
  };
  Eigen::MatrixXd jac(3, 4);
  for (int row = 0; row < 3; ++row) {
    const auto g = numeric_gradient(fns[static_cast<std::size_t>(row)], state);
    for (int c = 0; c < 4; ++c) jac(row, c) = g[static_cast<std::size_t>(c)];
    const double norm = jac.row(row).norm();
    if (!(norm > 0.0)) throw IllConditionedError("gradient_singular_values: vanishing gradient");
    jac.row(row) /= norm;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const auto& sv = svd.singularValues();
  return {sv(0), sv(1), sv(2)};
}

}  // namespace ttw

#endif  // TTW_POLYINT_HPP
