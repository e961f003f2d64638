#pragma once

// Independent reference computations shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace oracle {

/// Length of the full line o + t d inside the box [x0, x1] x [y0, y1].
inline double box_chord(const Eigen::Vector2d& o, const Eigen::Vector2d& d, double x0, double x1,
                        double y0, double y1) {
  double tmin = -1e300, tmax = 1e300;
  for (int k = 0; k < 2; ++k) {
    const double lo = k == 0 ? x0 : y0, hi = k == 0 ? x1 : y1;
    if (std::abs(d[k]) < 1e-300) {
      if (o[k] < lo || o[k] > hi) return 0.0;
      continue;
    }
    double t0 = (lo - o[k]) / d[k], t1 = (hi - o[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  return std::max(0.0, (tmax - tmin) * d.norm());
}

/// Per-pixel chord lengths of a line over the center-inclusion disk of an
/// n x n grid, row-major order of included pixels.
inline std::vector<double> disk_chords(int n, const Eigen::Vector2d& o, const Eigen::Vector2d& d) {
  const double h = 0.5 * n;
  std::vector<double> out;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double cx = c + 0.5 - h, cy = h - r - 0.5;
      if (cx * cx + cy * cy > h * h) continue;
      out.push_back(box_chord(o, d, c - h, c + 1 - h, h - r - 1, h - r));
    }
  return out;
}

/// Ray of bin b in view at `angle_deg` for a source at radius R with
/// 2n equi-angular bins whose fan covers the inscribed disk.
inline void fan_ray(int n, double radius, double angle_deg, int b, Eigen::Vector2d& o, Eigen::Vector2d& d) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double half = std::asin(0.5 * n / radius);
  const double g = -half + (b + 0.5) * (2.0 * half / (2 * n));
  o = {radius * std::cos(a), radius * std::sin(a)};
  const double phi = a + std::numbers::pi + g;
  d = {std::cos(phi), std::sin(phi)};
}

/// E[(g - tau)_+^2] for a standard normal g, closed form.
inline double excess_moment(double tau) {
  const double q = 0.5 * std::erfc(tau / std::sqrt(2.0));
  const double phi = std::exp(-0.5 * tau * tau) / std::sqrt(2.0 * std::numbers::pi);
  return (1.0 + tau * tau) * q - tau * phi;
}

/// One-sample Kolmogorov-Smirnov statistic against U[lo, hi].
inline double ks_uniform(std::vector<double> v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double dmax = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double f = (v[k] - lo) / (hi - lo);
    dmax = std::max({dmax, (k + 1) / n - f, f - k / n});
  }
  return dmax;
}

}  // namespace oracle
