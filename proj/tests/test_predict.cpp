#include "doctest.h"
#include "phasect/error.hpp"
#include "phasect/predict.hpp"

using namespace phasect;

namespace {

Curve curve(Coords coords, std::initializer_list<std::pair<double, double>> pts) {
  Curve c;
  c.coords = coords;
  c.kind = CurveKind::imported;
  c.points.resize(static_cast<Index>(pts.size()), 2);
  Index k = 0;
  for (const auto& [x, y] : pts) {
    c.points(k, 0) = x;
    c.points(k, 1) = y;
    ++k;
  }
  return c;
}

constexpr double kN = 823592;
constexpr double kRays = 2048;

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("views and sampling conversions") {
  CHECK(views_to_sampling(71.7, kN, kRays) == doctest::Approx(0.178294).epsilon(1e-5));
  CHECK(views_to_sampling(185.8, kN, kRays) == doctest::Approx(0.46202).epsilon(1e-4));
  CHECK(sampling_to_views(views_to_sampling(13.0, kN, kRays), kN, kRays) == doctest::Approx(13.0));
}

TEST_CASE("ALMT prediction") {
  PredictionInput in{45074, kN, kRays, curve(Coords::ALMT, {{0.01, 0.1}, {45074 / kN, 0.17829}, {0.2, 0.5}})};
  CHECK(predict_views_almt(in) == doctest::Approx(71.7).epsilon(2e-4));
  const Prediction p = predict(in);
  CHECK(p.views_ceil == 72);
  CHECK(p.m_critical == doctest::Approx(0.17829 * kN));

  PredictionInput diag{500, 1000, 10, curve(Coords::ALMT, {{0.01, 0.01}, {0.99, 0.99}})};
  CHECK(predict_views_almt(diag) == doctest::Approx(50.0));
  diag.s = 5;
  CHECK_THROWS_AS(predict_views_almt(diag), InvalidArgument);
  diag.s = 0;
  CHECK_THROWS_AS(predict_views_almt(diag), InvalidArgument);
  diag.s = 500;
  diag.rays_per_view = 0.5;
  CHECK_THROWS_AS(predict_views_almt(diag), InvalidArgument);
}

TEST_CASE("DT prediction") {
  PredictionInput full{300, 1000, 10, curve(Coords::DT, {{0.01, 1.0}, {1.0, 1.0}})};
  CHECK(predict_views_dt(full) == doctest::Approx(30.0).epsilon(1e-7));

  // contour through the point read off for the structure phantom
  const double delta = 69.3 * kRays / kN;
  const double rho = 45074 / (delta * kN);
  PredictionInput walnut{45074, kN, kRays, curve(Coords::DT, {{0.1, 0.25}, {delta, rho}, {0.3, 0.4}})};
  CHECK(predict_views_dt(walnut) == doctest::Approx(69.3).epsilon(1e-6));

  PredictionInput none{999, 1000, 10, curve(Coords::DT, {{0.1, 0.1}, {0.9, 0.2}})};
  CHECK_THROWS_AS(predict_views_dt(none), InvalidArgument);
  CHECK_THROWS_AS(predict_views_almt(walnut), InvalidArgument);
}

TEST_CASE("ALMT and DT paths agree on a converted curve") {
  std::vector<double> beta;
  for (int k = 1; k <= 99; ++k) beta.push_back(k / 100.0);
  const Curve almt = almt_curve(CurveKind::theoretical_l1, beta);
  const Curve dt = convert_coords(almt, Coords::DT);
  double prev = 0.0;
  for (double s : {0.05 * kN, 0.1 * kN, 0.3 * kN, 0.6 * kN}) {
    const double va = predict_views_almt({s, kN, kRays, almt});
    const double vd = predict_views_dt({s, kN, kRays, dt});
    CHECK(std::abs(va - vd) <= 1e-3 * kN / kRays);
    CHECK(va >= prev);
    prev = va;
  }
}

}
