#include "phasect/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "phasect/error.hpp"
#include "phasect/rng.hpp"

namespace phasect {

DiskMask::DiskMask(int n_side) : n_side_(n_side) {
  if (n_side < 2) throw InvalidArgument("disk mask needs n_side >= 2");
  const double h = 0.5 * n_side;
  lookup_.assign(static_cast<std::size_t>(n_side) * n_side, -1);
  for (int r = 0; r < n_side; ++r) {
    for (int c = 0; c < n_side; ++c) {
      const double x = c + 0.5 - h;
      const double y = h - r - 0.5;
      if (x * x + y * y <= h * h) {
        lookup_[static_cast<std::size_t>(r) * n_side + c] = static_cast<Index>(pixels_.size());
        pixels_.push_back({r, c});
      }
    }
  }
}

Index DiskMask::index_of(int row, int col) const noexcept {
  if (row < 0 || col < 0 || row >= n_side_ || col >= n_side_) return -1;
  return lookup_[static_cast<std::size_t>(row) * n_side_ + col];
}

Matrix DiskMask::to_square(const Eigen::Ref<const Vector>& values) const {
  if (values.size() != n_pixels()) throw DimensionMismatch("image length does not match mask");
  Matrix square = Matrix::Zero(n_side_, n_side_);
  for (Index j = 0; j < n_pixels(); ++j) square(pixels_[j].row, pixels_[j].col) = values[j];
  return square;
}

const char* to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::fanbeam: return "fanbeam";
    case GeometryKind::fanbeam_rand: return "fanbeam_rand";
    case GeometryKind::random_rays: return "random_rays";
    case GeometryKind::gaussian: return "gaussian";
  }
  return "?";
}

GeometryKind parse_geometry_kind(const std::string& text) {
  if (text == "fanbeam") return GeometryKind::fanbeam;
  if (text == "fanbeam_rand") return GeometryKind::fanbeam_rand;
  if (text == "random_rays") return GeometryKind::random_rays;
  if (text == "gaussian") return GeometryKind::gaussian;
  throw InvalidArgument("unknown geometry: " + text);
}

Ray parallel_ray(double angle_deg, double offset) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const Eigen::Vector2d dir(std::cos(a), std::sin(a));
  const Eigen::Vector2d normal(-dir.y(), dir.x());
  return {offset * normal, dir};
}

std::vector<std::pair<Index, double>> trace_ray(const DiskMask& mask, const Ray& ray) {
  const int n = mask.n_side();
  const double h = 0.5 * n;
  const Eigen::Vector2d& o = ray.origin;
  const Eigen::Vector2d& d = ray.direction;

  // Parameter interval inside the bounding square.
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < -h || o[axis] > h) return {};
      continue;
    }
    double a = (-h - o[axis]) / d[axis];
    double b = (h - o[axis]) / d[axis];
    if (a > b) std::swap(a, b);
    t_lo = std::max(t_lo, a);
    t_hi = std::min(t_hi, b);
  }
  if (!(t_hi > t_lo)) return {};

  // Crossings with interior grid lines, merged with the end points.
  std::vector<double> ts;
  ts.reserve(2 * n + 2);
  ts.push_back(t_lo);
  ts.push_back(t_hi);
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) continue;
    for (int k = 1; k < n; ++k) {
      const double t = (k - h - o[axis]) / d[axis];
      if (t > t_lo && t < t_hi) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<std::pair<Index, double>> out;
  const double min_len = 1e-12 * n;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= min_len) continue;
    const Eigen::Vector2d mid = o + 0.5 * (ts[k] + ts[k + 1]) * d;
    const int col = std::clamp(static_cast<int>(std::floor(mid.x() + h)), 0, n - 1);
    const int row = std::clamp(static_cast<int>(std::floor(h - mid.y())), 0, n - 1);
    const Index j = mask.index_of(row, col);
    if (j < 0) continue;
    if (!out.empty() && out.back().first == j)
      out.back().second += len;
    else
      out.emplace_back(j, len);
  }
  return out;
}

SensingMatrix::SensingMatrix(SparseMatrix matrix, Geometry geometry)
    : storage_(std::move(matrix)), geometry_(std::move(geometry)) {}

SensingMatrix::SensingMatrix(Matrix matrix, Geometry geometry)
    : storage_(std::move(matrix)), geometry_(std::move(geometry)) {}

Index SensingMatrix::rows() const {
  return visit([](const auto& m) { return m.rows(); });
}

Index SensingMatrix::cols() const {
  return visit([](const auto& m) { return m.cols(); });
}

std::string SensingMatrix::id() const {
  std::ostringstream os;
  os << to_string(geometry_.kind) << ":m=" << rows() << ":n=" << cols();
  if (is_ct(geometry_.kind)) os << ":nside=" << geometry_.n_side;
  if (geometry_.n_views > 0) os << ":views=" << geometry_.n_views;
  if (geometry_.kind == GeometryKind::fanbeam) os << ":offset=" << geometry_.offset_deg;
  if (geometry_.kind != GeometryKind::fanbeam) os << ":seed=" << geometry_.seed;
  return os.str();
}

SensingMatrix build_from_rays(const DiskMask& mask, const std::vector<Ray>& rays,
                              Geometry geometry) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (const auto& [j, len] : trace_ray(mask, rays[i]))
      triplets.emplace_back(static_cast<Index>(i), j, len);
  }
  SparseMatrix a(static_cast<Index>(rays.size()), mask.n_pixels());
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.prune(0.0);
  a.makeCompressed();
  return SensingMatrix(std::move(a), std::move(geometry));
}

namespace {

// Curved detector centered on the source: 2 n_side equi-angular bins whose
// fan exactly covers the inscribed disk.
std::vector<Ray> fan_rays(int n_side, const std::vector<double>& angles_deg, double radius) {
  const double h = 0.5 * n_side;
  const double half_fan = std::asin(h / radius);
  const int bins = 2 * n_side;
  std::vector<Ray> rays;
  rays.reserve(angles_deg.size() * bins);
  for (double angle : angles_deg) {
    const double a = angle * std::numbers::pi / 180.0;
    const Eigen::Vector2d source(radius * std::cos(a), radius * std::sin(a));
    const Eigen::Vector2d central = -source.normalized();
    for (int b = 0; b < bins; ++b) {
      const double gamma = -half_fan + (b + 0.5) * (2.0 * half_fan / bins);
      const Eigen::Vector2d dir = Eigen::Rotation2Dd(gamma) * central;
      rays.push_back({source, dir});
    }
  }
  return rays;
}

void check_fan_args(int n_side, int n_views, double& radius) {
  if (n_side < 2) throw InvalidArgument("n_side must be >= 2");
  if (n_views < 1) throw InvalidArgument("n_views must be >= 1");
  if (radius == 0.0) radius = default_source_radius(n_side);
  if (!(radius > 0.5 * n_side)) throw InvalidArgument("source must lie outside the disk");
}

}  // namespace

SensingMatrix build_fanbeam(int n_side, int n_views, double offset_deg, double source_radius) {
  check_fan_args(n_side, n_views, source_radius);
  Geometry g{GeometryKind::fanbeam, n_side, n_views, offset_deg, source_radius, 0, {}};
  for (int k = 0; k < n_views; ++k) g.view_angles_deg.push_back(offset_deg + k * 360.0 / n_views);
  const DiskMask mask(n_side);
  auto rays = fan_rays(n_side, g.view_angles_deg, source_radius);
  return build_from_rays(mask, rays, std::move(g));
}

SensingMatrix build_fanbeam_random(int n_side, int n_views, std::uint64_t seed,
                                   double source_radius) {
  check_fan_args(n_side, n_views, source_radius);
  Geometry g{GeometryKind::fanbeam_rand, n_side, n_views, 0.0, source_radius, seed, {}};
  Rng rng(seed);
  for (int k = 0; k < n_views; ++k) g.view_angles_deg.push_back(rng.uniform(0.0, 360.0));
  const DiskMask mask(n_side);
  auto rays = fan_rays(n_side, g.view_angles_deg, source_radius);
  return build_from_rays(mask, rays, std::move(g));
}

SensingMatrix build_random_rays(int n_side, Index n_rays, std::uint64_t seed) {
  if (n_side < 2) throw InvalidArgument("n_side must be >= 2");
  if (n_rays < 1) throw InvalidArgument("n_rays must be >= 1");
  const double h = 0.5 * n_side;
  Rng rng(seed);
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(n_rays));
  for (Index i = 0; i < n_rays; ++i) {
    const double angle = rng.uniform(0.0, 180.0);
    const double offset = rng.uniform(-h, h);
    rays.push_back(parallel_ray(angle, offset));
  }
  Geometry g{GeometryKind::random_rays, n_side, 0, 0.0, 0.0, seed, {}};
  return build_from_rays(DiskMask(n_side), rays, std::move(g));
}

SensingMatrix build_gaussian(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidArgument("gaussian matrix needs m, n >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(m, n);
  for (Index k = 0; k < a.size(); ++k) a.data()[k] = normal(rng);
  Geometry g{GeometryKind::gaussian, 0, 0, 0.0, 0.0, seed, {}};
  return SensingMatrix(std::move(a), std::move(g));
}

Vector apply(const SensingMatrix& a, const Eigen::Ref<const Vector>& x) {
  if (x.size() != a.cols()) throw DimensionMismatch("apply: vector length != matrix columns");
  return a.visit([&](const auto& m) -> Vector { return m * x; });
}

Vector apply_transpose(const SensingMatrix& a, const Eigen::Ref<const Vector>& y) {
  if (y.size() != a.rows()) throw DimensionMismatch("apply_transpose: vector length != matrix rows");
  return a.visit([&](const auto& m) -> Vector { return m.transpose() * y; });
}

Sinogram project(const SensingMatrix& a, const Eigen::Ref<const Vector>& x) {
  return {apply(a, x), a.id()};
}

double spectral_norm(const NormalOperator& normal, Index n, const PowerIterationOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("spectral_norm: tol must be positive");
  if (n < 1) throw InvalidArgument("spectral_norm: empty operator");
  Rng rng(opts.seed);
  Vector v(n);
  for (Index k = 0; k < n; ++k) v[k] = rng.uniform(-1.0, 1.0);
  v.normalize();

  double previous = 0.0;
  double lambda = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Vector w = normal(v);
    lambda = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 1 && std::abs(lambda - previous) <= opts.tol * std::abs(lambda))
      return std::sqrt(std::max(lambda, 0.0));
    previous = lambda;
  }
  throw ConvergenceError("power iteration did not converge", opts.max_iter,
                         std::sqrt(std::max(lambda, 0.0)));
}

double spectral_norm(const SensingMatrix& a, double tol) {
  return a.visit([&](const auto& m) {
    return spectral_norm([&](const Vector& v) -> Vector { return m.transpose() * (m * v); },
                         m.cols(), {.tol = tol});
  });
}

double spectral_norm(const SparseMatrix& a, double tol) {
  return spectral_norm([&](const Vector& v) -> Vector { return a.transpose() * (a * v); },
                       a.cols(), {.tol = tol});
}

double spectral_norm_stacked(const SensingMatrix& a, const SparseMatrix& s, double nu, double tol) {
  if (a.cols() != s.cols()) throw DimensionMismatch("stacked operator column mismatch");
  return a.visit([&](const auto& m) {
    return spectral_norm(
        [&](const Vector& v) -> Vector {
          return m.transpose() * (m * v) + (nu * nu) * (s.transpose() * (s * v));
        },
        m.cols(), {.tol = tol});
  });
}

}  // namespace phasect
