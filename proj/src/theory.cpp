#include "phasect/theory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "phasect/error.hpp"

namespace phasect {

const char* to_string(Coords c) { return c == Coords::DT ? "dt" : "almt"; }

Coords parse_coords(const std::string& text) {
  if (text == "dt" || text == "DT") return Coords::DT;
  if (text == "almt" || text == "ALMT") return Coords::ALMT;
  throw InvalidArgument("unknown coordinate system: " + text);
}

const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::theoretical_l1: return "theoretical_l1";
    case CurveKind::theoretical_l1_nonneg: return "theoretical_l1_nonneg";
    case CurveKind::imported: return "imported";
    case CurveKind::empirical_contour: return "empirical_contour";
  }
  return "?";
}

CurveKind parse_curve_kind(const std::string& text) {
  for (auto k : {CurveKind::theoretical_l1, CurveKind::theoretical_l1_nonneg, CurveKind::imported,
                 CurveKind::empirical_contour})
    if (text == to_string(k)) return k;
  throw InvalidArgument("unknown curve kind: " + text);
}

void validate(const Curve& curve) {
  for (Index i = 0; i < curve.size(); ++i) {
    const double x = curve.points(i, 0);
    const double y = curve.points(i, 1);
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
      throw InvalidArgument("curve point " + std::to_string(i) + " outside [0,1]^2");
    if (curve.kind != CurveKind::empirical_contour && i > 0 && !(x > curve.points(i - 1, 0)))
      throw InvalidArgument("curve abscissae are not strictly increasing at point " +
                            std::to_string(i));
  }
}

double interpolate(const Curve& curve, double x) {
  const Index n = curve.size();
  if (n == 0) throw InvalidArgument("interpolate: empty curve");
  const auto xs = curve.abscissa();
  if (x < xs[0] || x > xs[n - 1])
    throw InvalidArgument("interpolate: abscissa outside curve support");
  if (n == 1) return curve.points(0, 1);
  const auto* begin = xs.data();
  const auto* it = std::upper_bound(begin, begin + n, x);
  Index hi = std::min<Index>(it - begin, n - 1);
  const Index lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return (1.0 - t) * curve.points(lo, 1) + t * curve.points(hi, 1);
}

namespace {

constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double gk_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                   int depth) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  for (int k = 0; k < 7; ++k) {
    const double dx = half * kKronrodNodes[k];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[k] * pair;
    if (k % 2 == 1) gauss += kGaussWeights[k / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  if (std::abs(kronrod - gauss) <= tol || depth <= 0) return kronrod;
  return gk_adaptive(f, a, center, 0.5 * tol, depth - 1) +
         gk_adaptive(f, center, b, 0.5 * tol, depth - 1);
}

double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
double normal_tail(double u) { return 0.5 * std::erfc(u / std::numbers::sqrt2); }

// beta (1 + tau^2) + (1 - beta) * off_support_weight * E[(g - tau)_+^2]
double descent_objective(double beta, double tau, double off_support_weight) {
  return beta * (1.0 + tau * tau) + (1.0 - beta) * off_support_weight * gaussian_excess_moment(tau);
}

double minimise_over_tau(double beta, double off_support_weight) {
  constexpr double inv_phi = 0.6180339887498949;
  double lo = 0.0;
  double hi = 10.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = descent_objective(beta, x1, off_support_weight);
  double f2 = descent_objective(beta, x2, off_support_weight);
  while (hi - lo > 1e-9) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = descent_objective(beta, x1, off_support_weight);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = descent_objective(beta, x2, off_support_weight);
    }
  }
  // Refinement: the minimum may sit on the tau = 0 boundary.
  const double tau = 0.5 * (lo + hi);
  return std::min({descent_objective(beta, tau, off_support_weight), f1, f2,
                   descent_objective(beta, 0.0, off_support_weight)});
}

double psi_generic(double beta, double off_support_weight) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("psi: beta must lie in [0, 1]");
  if (beta == 0.0) return 0.0;
  if (beta >= 1.0) return 1.0;
  return std::clamp(minimise_over_tau(beta, off_support_weight), 0.0, 1.0);
}

}  // namespace

double integrate_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                               double abs_tol, int max_depth) {
  if (a == b) return 0.0;
  return gk_adaptive(f, a, b, abs_tol, max_depth);
}

double gaussian_excess_moment(double tau) {
  const double upper = tau + 12.0;
  const double body = integrate_gauss_kronrod(
      [tau](double u) { return (u - tau) * (u - tau) * normal_pdf(u); }, tau, upper, 1e-12);
  // int_T^inf (u - tau)^2 phi(u) du = (1 + tau^2) Q(T) + (T - 2 tau) phi(T)
  const double tail = (1.0 + tau * tau) * normal_tail(upper) + (upper - 2.0 * tau) * normal_pdf(upper);
  return body + tail;
}

double psi_l1(double beta) { return psi_generic(beta, 2.0); }
double psi_l1_nonneg(double beta) { return psi_generic(beta, 1.0); }

double psi(CurveKind kind, double beta) {
  switch (kind) {
    case CurveKind::theoretical_l1: return psi_l1(beta);
    case CurveKind::theoretical_l1_nonneg: return psi_l1_nonneg(beta);
    default: throw InvalidArgument("psi: curve kind has no theoretical formula");
  }
}

double psi_inverse(CurveKind kind, double delta, double tol) {
  if (delta <= 0.0) return 0.0;
  if (delta >= 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (psi(kind, mid) < delta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

Curve make_curve(Coords coords, CurveKind kind, std::vector<std::array<double, 2>> pts,
                 std::string provenance) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& p, const auto& q) { return p[0] == q[0]; }),
            pts.end());
  Curve c;
  c.coords = coords;
  c.kind = kind;
  c.provenance = std::move(provenance);
  c.points.resize(static_cast<Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.points(static_cast<Index>(i), 0) = pts[i][0];
    c.points(static_cast<Index>(i), 1) = pts[i][1];
  }
  return c;
}

void require_theoretical(CurveKind kind) {
  if (kind != CurveKind::theoretical_l1 && kind != CurveKind::theoretical_l1_nonneg)
    throw InvalidArgument("expected a theoretical curve kind");
}

}  // namespace

Curve dt_curve_from_psi(CurveKind kind, const std::vector<double>& rho_grid) {
  require_theoretical(kind);
  std::vector<std::array<double, 2>> pts;
  for (double rho : rho_grid) {
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho grid must lie in (0, 1]");
    auto h = [&](double delta) { return delta - psi(kind, rho * delta); };
    double lo = 1e-12;
    double hi = 1.0;
    if (h(lo) >= 0.0 || h(hi) < 0.0)
      throw Error("dt_curve_from_psi: bisection bracket failure at rho=" + std::to_string(rho));
    while (hi - lo > 1e-13) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) < 0.0 ? lo : hi) = mid;
    }
    pts.push_back({hi, rho});
  }
  return make_curve(Coords::DT, kind, std::move(pts), "fixed point delta = psi(rho delta)");
}

Curve dt_curve_on_delta_grid(CurveKind kind, const std::vector<double>& delta_grid) {
  require_theoretical(kind);
  std::vector<std::array<double, 2>> pts;
  for (double delta : delta_grid) {
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta grid must lie in (0, 1]");
    pts.push_back({delta, std::min(1.0, psi_inverse(kind, delta) / delta)});
  }
  return make_curve(Coords::DT, kind, std::move(pts), "rho = psi^-1(delta) / delta");
}

Curve almt_curve(CurveKind kind, const std::vector<double>& beta_grid) {
  require_theoretical(kind);
  std::vector<std::array<double, 2>> pts;
  for (double beta : beta_grid) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta grid must lie in [0, 1]");
    pts.push_back({beta, psi(kind, beta)});
  }
  return make_curve(Coords::ALMT, kind, std::move(pts), "statistical dimension");
}

Curve convert_coords(const Curve& curve, Coords target) {
  if (curve.coords == target) return curve;
  Curve out;
  out.coords = target;
  out.kind = curve.kind;
  out.provenance = curve.provenance;
  std::vector<std::array<double, 2>> pts;
  for (Index i = 0; i < curve.size(); ++i) {
    const double a = curve.points(i, 0);
    const double b = curve.points(i, 1);
    if (target == Coords::DT) {
      if (b == 0.0) continue;
      pts.push_back({b, a / b});  // (s/N, m/N) -> (m/N, s/m)
    } else {
      if (a == 0.0) continue;
      pts.push_back({b * a, a});  // (m/N, s/m) -> (s/N, m/N)
    }
  }
  out.points.resize(static_cast<Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.points(static_cast<Index>(i), 0) = pts[i][0];
    out.points(static_cast<Index>(i), 1) = pts[i][1];
  }
  return out;
}

Curve import_curve(const std::string& path, Coords coords) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open curve file: " + path);
  std::vector<std::array<double, 2>> pts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double x, y;
    if (!(fields >> x >> y)) {
      if (pts.empty() && line_no == 1) continue;  // header
      throw InvalidArgument("malformed curve line " + std::to_string(line_no) + " in " + path);
    }
    pts.push_back({x, y});
  }
  Curve c;
  c.coords = coords;
  c.kind = CurveKind::imported;
  c.provenance = "imported from " + path;
  c.points.resize(static_cast<Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.points(static_cast<Index>(i), 0) = pts[i][0];
    c.points(static_cast<Index>(i), 1) = pts[i][1];
  }
  if (c.empty()) throw InvalidArgument("curve file has no points: " + path);
  validate(c);
  return c;
}

void export_curve(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve file: " + path);
  char buf[64];
  for (Index i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", curve.points(i, 0), curve.points(i, 1));
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
  nlohmann::json meta = {{"coords", to_string(curve.coords)},
                         {"kind", to_string(curve.kind)},
                         {"provenance", curve.provenance},
                         {"points", curve.size()}};
  std::ofstream side(path + ".json");
  side << meta.dump(2) << '\n';
  if (!side) throw IoError("write failed: " + path + ".json");
}

}  // namespace phasect
