#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "phasect/types.hpp"

namespace phasect {

struct PixelIndex {
  int row;
  int col;
  friend auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
};

/// Pixels of an n_side x n_side square whose centers lie in the closed
/// inscribed disk. Pixel (row, col) covers x in [col - h, col + 1 - h],
/// y in [h - row - 1, h - row] with h = n_side / 2; row 0 is the top.
class DiskMask {
 public:
  explicit DiskMask(int n_side);

  int n_side() const noexcept { return n_side_; }
  Index n_pixels() const noexcept { return static_cast<Index>(pixels_.size()); }
  const std::vector<PixelIndex>& pixels() const noexcept { return pixels_; }

  /// Column index of (row, col), or -1 when outside the mask or the grid.
  Index index_of(int row, int col) const noexcept;

  /// Scatter masked values into a dense n_side x n_side array (zeros outside).
  Matrix to_square(const Eigen::Ref<const Vector>& values) const;

 private:
  int n_side_;
  std::vector<PixelIndex> pixels_;
  std::vector<Index> lookup_;
};

enum class GeometryKind { fanbeam, fanbeam_rand, random_rays, gaussian };

const char* to_string(GeometryKind kind);
GeometryKind parse_geometry_kind(const std::string& text);
inline bool is_ct(GeometryKind kind) { return kind != GeometryKind::gaussian; }

struct Geometry {
  GeometryKind kind = GeometryKind::fanbeam;
  int n_side = 0;
  int n_views = 0;
  double offset_deg = 0.0;
  double source_radius = 0.0;
  std::uint64_t seed = 0;
  /// Source angles (fan-beam kinds) in degrees, in row-block order.
  std::vector<double> view_angles_deg;
};

/// A line in the image plane; `direction` has unit length.
struct Ray {
  Eigen::Vector2d origin;
  Eigen::Vector2d direction;
};

/// Ray at `angle_deg` from the x-axis, passing the orthogonal diameter at
/// signed distance `offset` from the center.
Ray parallel_ray(double angle_deg, double offset);

/// Exact intersection lengths of `ray` with the masked pixels, as
/// (column, length) pairs with length > 0, in traversal order.
std::vector<std::pair<Index, double>> trace_ray(const DiskMask& mask, const Ray& ray);

/// m x n measurement operator: sparse row storage for CT geometries,
/// dense for Gaussian.
class SensingMatrix {
 public:
  SensingMatrix(SparseMatrix matrix, Geometry geometry);
  SensingMatrix(Matrix matrix, Geometry geometry);

  Index rows() const;
  Index cols() const;
  bool is_sparse() const noexcept { return std::holds_alternative<SparseMatrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const Geometry& geometry() const noexcept { return geometry_; }

  /// Stable textual provenance tag, e.g. "fanbeam:nside=16:views=4:...".
  std::string id() const;

  /// Visit the underlying Eigen matrix.
  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), storage_);
  }

 private:
  std::variant<SparseMatrix, Matrix> storage_;
  Geometry geometry_;
};

struct Sinogram {
  Vector values;
  std::string matrix_id;
};

/// Default source radius in pixel units for an n_side image.
inline double default_source_radius(int n_side) { return 2.0 * n_side; }

SensingMatrix build_fanbeam(int n_side, int n_views, double offset_deg = 20.0,
                            double source_radius = 0.0);
SensingMatrix build_fanbeam_random(int n_side, int n_views, std::uint64_t seed,
                                   double source_radius = 0.0);
SensingMatrix build_random_rays(int n_side, Index n_rays, std::uint64_t seed);
SensingMatrix build_gaussian(Index m, Index n, std::uint64_t seed);

/// Rows from explicit rays; geometry metadata is taken as given.
SensingMatrix build_from_rays(const DiskMask& mask, const std::vector<Ray>& rays,
                              Geometry geometry);

Vector apply(const SensingMatrix& a, const Eigen::Ref<const Vector>& x);
Vector apply_transpose(const SensingMatrix& a, const Eigen::Ref<const Vector>& y);
Sinogram project(const SensingMatrix& a, const Eigen::Ref<const Vector>& x);

/// Action of a normal operator B^T B on a vector of length `n`.
using NormalOperator = std::function<Vector(const Vector&)>;

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  std::uint64_t seed = 0x5eed;
};

/// Largest singular value of B from its normal operator B^T B by power
/// iteration; stops when the relative eigenvalue change drops below tol.
/// Throws ConvergenceError carrying the last estimate otherwise.
double spectral_norm(const NormalOperator& normal, Index n, const PowerIterationOptions& opts = {});

double spectral_norm(const SensingMatrix& a, double tol = 1e-8);
double spectral_norm(const SparseMatrix& a, double tol = 1e-8);

/// ||(A; nu S)||_2 without forming the stacked matrix.
double spectral_norm_stacked(const SensingMatrix& a, const SparseMatrix& s, double nu,
                             double tol = 1e-8);

}  // namespace phasect
