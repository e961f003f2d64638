#pragma once

#include "phasect/theory.hpp"
#include "phasect/types.hpp"

namespace phasect {

struct PredictionInput {
  /// Absolute sparsity in the domain the curve describes.
  double s = 0.0;
  /// Total masked pixels.
  double n = 0.0;
  double rays_per_view = 0.0;
  Curve curve;
};

struct Prediction {
  double views_fractional = 0.0;
  long long views_ceil = 0;
  double m_critical = 0.0;
};

/// Critical views from the curve ordinate at s/N (ALMT coordinates).
double predict_views_almt(const PredictionInput& input);

/// Critical views from the intersection of rho(delta) with s/(delta N)
/// (DT coordinates).
double predict_views_dt(const PredictionInput& input);

/// Dispatches on the curve's coordinates.
Prediction predict(const PredictionInput& input);

inline double views_to_sampling(double views, double n, double rays_per_view) {
  return views * rays_per_view / n;
}
inline double sampling_to_views(double m_over_n, double n, double rays_per_view) {
  return m_over_n * n / rays_per_view;
}

}  // namespace phasect
