#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "phasect/sensing.hpp"
#include "phasect/types.hpp"

namespace phasect {

enum class ImageClass { signedspikes, spikes, altprojisotv, grains };

const char* to_string(ImageClass cls);
ImageClass parse_image_class(const std::string& text);

/// Forward-difference field: one (gx, gy) pair per masked pixel.
struct GradientField {
  Vector gx;
  Vector gy;
};

/// Forward differences on a disk mask. A component is zero wherever the
/// right (gx) or lower (gy) neighbour is outside the mask.
class GradientOperator {
 public:
  explicit GradientOperator(const DiskMask& mask);

  Index n_pixels() const noexcept { return n_; }
  /// Stacked (2N x N) operator [Dx; Dy].
  const SparseMatrix& matrix() const noexcept { return stacked_; }

  GradientField apply(const Eigen::Ref<const Vector>& x) const;
  Vector adjoint(const GradientField& g) const;

  /// Per-pixel gradient magnitudes ||D_j x||_2.
  Vector magnitudes(const Eigen::Ref<const Vector>& x) const;

 private:
  Index n_;
  SparseMatrix stacked_;
};

GradientField gradient(const DiskMask& mask, const Eigen::Ref<const Vector>& x);
Vector gradient_adjoint(const DiskMask& mask, const GradientField& g);

/// Isotropic TV semi-norm, sum_j ||D_j x||_2.
double tv_norm(const GradientOperator& d, const Eigen::Ref<const Vector>& x);
double tv_norm(const DiskMask& mask, const Eigen::Ref<const Vector>& x);

/// Pass tau < 0 for the default threshold 1e-8 * max|x|.
Index gradient_sparsity(const GradientOperator& d, const Eigen::Ref<const Vector>& x,
                        double tau = -1.0);
Index pixel_sparsity(const Eigen::Ref<const Vector>& x, double tau = -1.0);

/// `s` pixels at distinct uniform locations with values U[-1, 1].
Vector gen_signedspikes(Index n, Index s, std::uint64_t seed);
/// As gen_signedspikes with values U[0, 1].
Vector gen_spikes(Index n, Index s, std::uint64_t seed);

inline Vector gen_signedspikes(const DiskMask& mask, Index s, std::uint64_t seed) {
  return gen_signedspikes(mask.n_pixels(), s, seed);
}
inline Vector gen_spikes(const DiskMask& mask, Index s, std::uint64_t seed) {
  return gen_spikes(mask.n_pixels(), s, seed);
}

/// Image with at most s_grad (and at least 0.9 s_grad) nonzero gradient
/// groups, by alternating group thresholding and least-squares
/// integration. Throws GenerationError if the target is not met.
Vector gen_altprojisotv(const DiskMask& mask, Index s_grad, std::uint64_t seed,
                        int max_iter = 5000);

/// Union of `n_grains` random disks with U[0, 1] amplitudes; later grains
/// overwrite earlier ones.
Vector gen_grains(const DiskMask& mask, int n_grains, std::uint64_t seed);

/// Adds grains until the support reaches `s` pixels (may overshoot).
Vector gen_grains_with_support(const DiskMask& mask, Index s, std::uint64_t seed);

}  // namespace phasect
