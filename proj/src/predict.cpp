#include "phasect/predict.hpp"

#include <cmath>

#include "phasect/error.hpp"

namespace phasect {

namespace {

void check_input(const PredictionInput& in, Coords coords) {
  if (!(in.n > 0.0) || !(in.s > 0.0) || in.s > in.n)
    throw InvalidArgument("prediction needs 0 < s <= N");
  if (!(in.rays_per_view >= 1.0)) throw InvalidArgument("rays_per_view must be >= 1");
  if (in.curve.empty()) throw InvalidArgument("prediction curve is empty");
  if (in.curve.coords != coords)
    throw InvalidArgument(std::string("prediction curve must be in ") + to_string(coords) + " coordinates");
}

}  // namespace

double predict_views_almt(const PredictionInput& in) {
  check_input(in, Coords::ALMT);
  const double m_over_n = interpolate(in.curve, in.s / in.n);
  return sampling_to_views(m_over_n, in.n, in.rays_per_view);
}

double predict_views_dt(const PredictionInput& in) {
  check_input(in, Coords::DT);
  const auto x = in.curve.abscissa();
  double lo = std::max(x.minCoeff(), 0.0);
  double hi = std::min(x.maxCoeff(), 1.0);
  // f < 0 where the hyperbola lies above the curve (too few samples).
  auto f = [&](double delta) { return interpolate(in.curve, delta) - in.s / (delta * in.n); };
  if (!(lo > 0.0)) lo = std::nextafter(0.0, 1.0);
  const double flo = f(lo), fhi = f(hi);
  if (flo > 0.0 || fhi < 0.0)
    throw InvalidArgument("no intersection of the curve with the sparsity hyperbola");
  if (flo == 0.0) return lo * in.n / in.rays_per_view;
  while (hi - lo > 1e-8 * 0.5) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi) * in.n / in.rays_per_view;
}

Prediction predict(const PredictionInput& in) {
  Prediction p;
  p.views_fractional =
      in.curve.coords == Coords::ALMT ? predict_views_almt(in) : predict_views_dt(in);
  p.views_ceil = static_cast<long long>(std::ceil(p.views_fractional - 1e-12));
  p.m_critical = p.views_fractional * in.rays_per_view;
  return p;
}

}  // namespace phasect
