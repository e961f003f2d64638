#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phasect/types.hpp"

namespace phasect {

/// DT: (delta = m/N, rho = s/m).  ALMT: (s/N, m/N).
enum class Coords { DT, ALMT };
enum class CurveKind { theoretical_l1, theoretical_l1_nonneg, imported, empirical_contour };

const char* to_string(Coords c);
Coords parse_coords(const std::string& text);
const char* to_string(CurveKind k);
CurveKind parse_curve_kind(const std::string& text);

/// Phase-transition curve. Rows of `points` are (abscissa, ordinate).
/// Theoretical and imported curves have strictly increasing abscissae;
/// empirical contours are polylines in path order.
struct Curve {
  Coords coords = Coords::ALMT;
  CurveKind kind = CurveKind::imported;
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
  std::string provenance;

  Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }
  auto abscissa() const { return points.col(0); }
  auto ordinate() const { return points.col(1); }
};

/// Throws InvalidArgument unless values are in [0,1] and, for
/// non-contour kinds, abscissae are strictly increasing.
void validate(const Curve& curve);

/// Piecewise-linear interpolation on a curve with strictly increasing
/// abscissae; throws InvalidArgument outside [x_first, x_last].
double interpolate(const Curve& curve, double x);

/// Adaptive 7/15-point Gauss-Kronrod integration of f on [a, b].
double integrate_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                               double abs_tol = 1e-11, int max_depth = 40);

/// E[(g - tau)_+^2] for g ~ N(0,1), by quadrature on [tau, tau + 12]
/// plus the analytic tail remainder.
double gaussian_excess_moment(double tau);

/// Critical m/N for l1 recovery at sparsity fraction beta (statistical
/// dimension of the l1 descent cone, normalised).
double psi_l1(double beta);
/// One-sided variant for l1 with a nonnegativity constraint.
double psi_l1_nonneg(double beta);

double psi(CurveKind kind, double beta);
/// Smallest beta with psi(beta) >= delta, by bisection.
double psi_inverse(CurveKind kind, double delta, double tol = 1e-12);

/// Weak DT curve: for each rho in `rho_grid` the fixed point delta = psi(rho delta),
/// returned as (delta, rho) points sorted by delta.
Curve dt_curve_from_psi(CurveKind kind, const std::vector<double>& rho_grid);
/// Same curve sampled at given deltas: rho(delta) = psi^{-1}(delta) / delta.
Curve dt_curve_on_delta_grid(CurveKind kind, const std::vector<double>& delta_grid);
/// ALMT curve (beta, psi(beta)) on the given sparsity fractions.
Curve almt_curve(CurveKind kind, const std::vector<double>& beta_grid);

/// Exact pointwise DT <-> ALMT transform; points with m/N = 0 are dropped.
Curve convert_coords(const Curve& curve, Coords target);

/// Two-column CSV (optional non-numeric header, '#' comments).
Curve import_curve(const std::string& path, Coords coords);
void export_curve(const Curve& curve, const std::string& path);

}  // namespace phasect
