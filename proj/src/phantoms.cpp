#include "phasect/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/SparseCholesky>

#include "phasect/error.hpp"
#include "phasect/rng.hpp"

namespace phasect {

const char* to_string(ImageClass cls) {
  switch (cls) {
    case ImageClass::signedspikes: return "signedspikes";
    case ImageClass::spikes: return "spikes";
    case ImageClass::altprojisotv: return "altprojisotv";
    case ImageClass::grains: return "grains";
  }
  return "?";
}

ImageClass parse_image_class(const std::string& text) {
  if (text == "signedspikes") return ImageClass::signedspikes;
  if (text == "spikes") return ImageClass::spikes;
  if (text == "altprojisotv") return ImageClass::altprojisotv;
  if (text == "grains") return ImageClass::grains;
  throw InvalidArgument("unknown image class: " + text);
}

GradientOperator::GradientOperator(const DiskMask& mask) : n_(mask.n_pixels()) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(4 * n_));
  const auto& px = mask.pixels();
  for (Index j = 0; j < n_; ++j) {
    const Index right = mask.index_of(px[j].row, px[j].col + 1);
    if (right >= 0) {
      t.emplace_back(j, right, 1.0);
      t.emplace_back(j, j, -1.0);
    }
    const Index down = mask.index_of(px[j].row + 1, px[j].col);
    if (down >= 0) {
      t.emplace_back(n_ + j, down, 1.0);
      t.emplace_back(n_ + j, j, -1.0);
    }
  }
  stacked_.resize(2 * n_, n_);
  stacked_.setFromTriplets(t.begin(), t.end());
  stacked_.makeCompressed();
}

GradientField GradientOperator::apply(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != n_) throw DimensionMismatch("gradient: image length mismatch");
  Vector g = stacked_ * x;
  return {g.head(n_), g.tail(n_)};
}

Vector GradientOperator::adjoint(const GradientField& g) const {
  if (g.gx.size() != n_ || g.gy.size() != n_)
    throw DimensionMismatch("gradient_adjoint: field length mismatch");
  Vector stacked(2 * n_);
  stacked << g.gx, g.gy;
  return stacked_.transpose() * stacked;
}

Vector GradientOperator::magnitudes(const Eigen::Ref<const Vector>& x) const {
  const GradientField g = apply(x);
  return (g.gx.array().square() + g.gy.array().square()).sqrt();
}

GradientField gradient(const DiskMask& mask, const Eigen::Ref<const Vector>& x) {
  return GradientOperator(mask).apply(x);
}

Vector gradient_adjoint(const DiskMask& mask, const GradientField& g) {
  return GradientOperator(mask).adjoint(g);
}

double tv_norm(const GradientOperator& d, const Eigen::Ref<const Vector>& x) {
  return d.magnitudes(x).sum();
}

double tv_norm(const DiskMask& mask, const Eigen::Ref<const Vector>& x) {
  return tv_norm(GradientOperator(mask), x);
}

namespace {

double default_tau(const Eigen::Ref<const Vector>& x, double tau) {
  if (tau >= 0.0) return tau;
  return x.size() == 0 ? 0.0 : 1e-8 * x.cwiseAbs().maxCoeff();
}

Vector gen_uniform_spikes(Index n, Index s, std::uint64_t seed, double lo) {
  if (n < 1) throw InvalidArgument("image must have at least one pixel");
  if (s < 0 || s > n) throw InvalidArgument("sparsity out of range [0, N]");
  Rng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Vector x = Vector::Zero(n);
  for (Index k = 0; k < s; ++k) {
    const auto pick = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(perm[k], perm[pick]);
    double v = 0.0;
    while (v == 0.0) v = rng.uniform(lo, 1.0);
    x[perm[k]] = v;
  }
  return x;
}

}  // namespace

Index gradient_sparsity(const GradientOperator& d, const Eigen::Ref<const Vector>& x, double tau) {
  const double t = default_tau(x, tau);
  return (d.magnitudes(x).array() > t).count();
}

Index pixel_sparsity(const Eigen::Ref<const Vector>& x, double tau) {
  const double t = default_tau(x, tau);
  return (x.array().abs() > t).count();
}

Vector gen_signedspikes(Index n, Index s, std::uint64_t seed) {
  return gen_uniform_spikes(n, s, seed, -1.0);
}

Vector gen_spikes(Index n, Index s, std::uint64_t seed) {
  return gen_uniform_spikes(n, s, seed, 0.0);
}

namespace {

// Least-squares integration min ||D x - g|| with pixel 0 pinned; the
// reduced normal matrix is positive definite on a connected mask.
class GradientIntegrator {
 public:
  explicit GradientIntegrator(const GradientOperator& d) {
    const Eigen::SparseMatrix<double> full = d.matrix();
    reduced_ = full.rightCols(full.cols() - 1);
    Eigen::SparseMatrix<double> normal = reduced_.transpose() * reduced_;
    solver_.compute(normal);
    if (solver_.info() != Eigen::Success)
      throw Error("gradient integration: normal matrix factorization failed");
  }

  Vector solve(const Vector& g) const {
    Vector x(reduced_.cols() + 1);
    x[0] = 0.0;
    x.tail(reduced_.cols()) = solver_.solve(reduced_.transpose() * g);
    return x;
  }

 private:
  Eigen::SparseMatrix<double> reduced_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace

Vector gen_altprojisotv(const DiskMask& mask, Index s_grad, std::uint64_t seed, int max_iter) {
  const Index n = mask.n_pixels();
  if (s_grad < 1 || s_grad > n) throw InvalidArgument("s_grad out of range [1, N]");
  if (max_iter < 1) throw InvalidArgument("max_iter must be >= 1");

  const GradientOperator d(mask);
  const Index lower = static_cast<Index>(std::ceil(0.9 * static_cast<double>(s_grad)));
  constexpr int attempts = 3;
  Index achieved = 0;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    Rng rng(attempt == 0 ? seed : mix_seed({seed, static_cast<std::uint64_t>(attempt)}));
    Vector x(n);
    for (Index j = 0; j < n; ++j) x[j] = rng.uniform();
    x /= x.cwiseAbs().maxCoeff();
    if (s_grad >= n) return x;

    const GradientIntegrator integrate(d);
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (int it = 0; it < max_iter; ++it) {
      const Vector mag = d.magnitudes(x);
      std::iota(order.begin(), order.end(), Index{0});
      std::nth_element(order.begin(), order.begin() + s_grad, order.end(),
                       [&](Index a, Index b) { return mag[a] > mag[b] || (mag[a] == mag[b] && a < b); });
      Vector g = d.matrix() * x;
      Eigen::Array<bool, Eigen::Dynamic, 1> keep = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false);
      for (Index k = 0; k < s_grad; ++k) keep[order[k]] = true;
      for (Index j = 0; j < n; ++j) {
        if (!keep[j]) {
          g[j] = 0.0;
          g[n + j] = 0.0;
        }
      }

      Vector next = integrate.solve(g);
      next.array() += x.mean() - next.mean();
      const double peak = next.cwiseAbs().maxCoeff();
      if (peak == 0.0) break;
      next /= peak;

      const double change = (next - x).norm() / next.norm();
      x = std::move(next);
      achieved = gradient_sparsity(d, x);
      if (achieved <= s_grad && change < 1e-6) {
        if (achieved >= lower) return x;
        break;
      }
    }
  }
  throw GenerationError("altprojisotv: gradient sparsity target not reached", achieved);
}

Vector gen_grains(const DiskMask& mask, int n_grains, std::uint64_t seed) {
  if (n_grains < 1) throw InvalidArgument("n_grains must be >= 1");
  const Index n = mask.n_pixels();
  const double h = 0.5 * mask.n_side();
  const double max_radius = std::max(1.5, mask.n_side() / 6.0);
  Rng rng(seed);
  Vector x = Vector::Zero(n);
  for (int g = 0; g < n_grains; ++g) {
    double cx, cy;
    do {
      cx = rng.uniform(-h, h);
      cy = rng.uniform(-h, h);
    } while (cx * cx + cy * cy > h * h);
    const double radius = rng.uniform(1.0, max_radius);
    double amplitude = 0.0;
    while (amplitude == 0.0) amplitude = rng.uniform();
    for (Index j = 0; j < n; ++j) {
      const auto& p = mask.pixels()[j];
      const double dx = p.col + 0.5 - h - cx;
      const double dy = h - p.row - 0.5 - cy;
      if (dx * dx + dy * dy <= radius * radius) x[j] = amplitude;
    }
  }
  return x;
}

Vector gen_grains_with_support(const DiskMask& mask, Index s, std::uint64_t seed) {
  const Index n = mask.n_pixels();
  if (s < 1 || s > n) throw InvalidArgument("grain support target out of range [1, N]");
  for (int count = 1; count <= 10 * n; ++count) {
    Vector x = gen_grains(mask, count, seed);
    if (pixel_sparsity(x) >= s) return x;
  }
  throw GenerationError("grains: support target not reached", 0);
}

}  // namespace phasect
