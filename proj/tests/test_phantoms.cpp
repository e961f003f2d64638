#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "phasect/error.hpp"
#include "phasect/phantoms.hpp"
#include "phasect/rng.hpp"

using namespace phasect;

TEST_SUITE("phantoms") {

TEST_CASE("spike classes: exact support, value ranges, determinism") {
  for (Index s : {0, 1, 50, 208}) {
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
      const Vector x = gen_signedspikes(208, s, seed);
      CHECK(pixel_sparsity(x) == s);
      CHECK(x.cwiseAbs().maxCoeff() <= 1.0);
      const Vector y = gen_spikes(208, s, seed);
      CHECK(pixel_sparsity(y) == s);
      CHECK(y.minCoeff() >= 0.0);
      CHECK(gen_signedspikes(208, s, seed) == x);
    }
  }
  CHECK(gen_signedspikes(208, 0, 1).isZero(0.0));
  CHECK_THROWS_AS(gen_signedspikes(208, 209, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_spikes(208, -1, 1), InvalidArgument);
}

TEST_CASE("spike values pass a KS uniformity test at 1%") {
  std::vector<double> signed_vals, pos_vals;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Vector x = gen_signedspikes(200, 100, seed);
    const Vector y = gen_spikes(200, 100, seed + 1000);
    for (Index k = 0; k < 200; ++k) {
      if (x(k) != 0.0) signed_vals.push_back(x(k));
      if (y(k) != 0.0) pos_vals.push_back(y(k));
    }
  }
  REQUIRE(signed_vals.size() == 10000);
  const double crit = 1.628 / std::sqrt(10000.0);
  CHECK(oracle::ks_uniform(signed_vals, -1.0, 1.0) < crit);
  CHECK(oracle::ks_uniform(pos_vals, 0.0, 1.0) < crit);
}

TEST_CASE("spike locations are uniform over pixels") {
  Vector hits = Vector::Zero(50);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) hits += gen_spikes(50, 5, seed).cwiseSign();
  // expected 200 per pixel; binomial sd about 13.4
  CHECK(hits.minCoeff() > 140);
  CHECK(hits.maxCoeff() < 260);
}

TEST_CASE("gradient of constant and ramp images") {
  const DiskMask mask(16);
  const GradientField z = gradient(mask, Vector::Constant(mask.n_pixels(), 2.5));
  CHECK(z.gx.isZero(0.0));
  CHECK(z.gy.isZero(0.0));

  Vector ramp(mask.n_pixels());
  for (Index k = 0; k < ramp.size(); ++k) ramp(k) = mask.pixels()[k].col;
  const GradientField g = gradient(mask, ramp);
  for (Index k = 0; k < ramp.size(); ++k) {
    const auto p = mask.pixels()[k];
    const bool right_in = mask.index_of(p.row, p.col + 1) >= 0;
    CHECK(g.gx(k) == (right_in ? 1.0 : 0.0));
    CHECK(g.gy(k) == 0.0);
  }
}

TEST_CASE("gradient adjoint identity") {
  const DiskMask mask(16);
  Rng rng(3);
  Vector x(mask.n_pixels());
  GradientField g{Vector(mask.n_pixels()), Vector(mask.n_pixels())};
  for (Index k = 0; k < x.size(); ++k) {
    x(k) = rng.uniform(-1, 1);
    g.gx(k) = rng.uniform(-1, 1);
    g.gy(k) = rng.uniform(-1, 1);
  }
  const GradientField dx = gradient(mask, x);
  const double lhs = dx.gx.dot(g.gx) + dx.gy.dot(g.gy);
  const double rhs = x.dot(gradient_adjoint(mask, g));
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
  CHECK_THROWS_AS(gradient(mask, Vector::Zero(5)), DimensionMismatch);
}

TEST_CASE("single interior spike") {
  const DiskMask mask(16);
  Vector x = Vector::Zero(mask.n_pixels());
  const double a = 1.7;
  x(mask.index_of(8, 8)) = a;
  CHECK(tv_norm(mask, x) == doctest::Approx(a * (2 + std::numbers::sqrt2)));
  CHECK(gradient_sparsity(GradientOperator(mask), x) == 3);
  CHECK(pixel_sparsity(Vector::Zero(mask.n_pixels())) == 0);
  CHECK(gradient_sparsity(GradientOperator(mask), Vector::Zero(mask.n_pixels())) == 0);
}

TEST_CASE("tv norm: per-pixel sum and homogeneity") {
  const DiskMask mask(16);
  const Vector x = gen_signedspikes(mask, 60, 5);
  double brute = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const auto p = mask.pixels()[k];
    const Index r = mask.index_of(p.row, p.col + 1), d = mask.index_of(p.row + 1, p.col);
    const double gx = r >= 0 ? x(r) - x(k) : 0.0, gy = d >= 0 ? x(d) - x(k) : 0.0;
    brute += std::hypot(gx, gy);
  }
  CHECK(tv_norm(mask, x) == doctest::Approx(brute).epsilon(1e-13));
  CHECK(tv_norm(mask, -3.0 * x) == doctest::Approx(3.0 * brute).epsilon(1e-13));
  CHECK(tv_norm(mask, Vector::Constant(x.size(), 4.0)) == 0.0);
}

TEST_CASE("altprojisotv reaches its gradient sparsity target") {
  const DiskMask mask(16);
  const GradientOperator d(mask);
  for (Index s : {20, 40, 80}) {
    for (std::uint64_t seed : {1ULL, 2ULL}) {
      const Vector x = gen_altprojisotv(mask, s, seed);
      const Index got = gradient_sparsity(d, x);
      CHECK(got <= s);
      CHECK(got >= static_cast<Index>(std::ceil(0.9 * s)));
      CHECK(x.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
      CHECK(gen_altprojisotv(mask, s, seed) == x);
    }
  }
  CHECK(gradient_sparsity(d, gen_altprojisotv(mask, mask.n_pixels(), 3)) <= mask.n_pixels());
  CHECK_THROWS_AS(gen_altprojisotv(mask, 0, 1), InvalidArgument);
}

TEST_CASE("altprojisotv ensemble at n_side 32, s = 0.2 N") {
  const DiskMask mask(32);
  const GradientOperator d(mask);
  const Index s = static_cast<Index>(0.2 * mask.n_pixels());
  double mean = 0.0;
  const int runs = 5;
  for (int k = 0; k < runs; ++k) mean += static_cast<double>(gradient_sparsity(d, gen_altprojisotv(mask, s, 100 + k)));
  mean /= runs;
  CHECK(mean >= 0.9 * s);
  CHECK(mean <= s);
}

TEST_CASE("altprojisotv reports failure with the achieved sparsity") {
  const DiskMask mask(16);
  try {
    gen_altprojisotv(mask, 40, 1, 1);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(e.achieved() >= 0);
  }
}

TEST_CASE("grains are nonnegative and piecewise constant") {
  const DiskMask mask(16);
  const Vector one = gen_grains(mask, 1, 4);
  CHECK(one.minCoeff() >= 0.0);
  // a single grain takes one nonzero value
  double v = 0.0;
  for (Index k = 0; k < one.size(); ++k)
    if (one(k) != 0.0) {
      if (v == 0.0) v = one(k);
      CHECK(one(k) == v);
    }
  CHECK(v > 0.0);
  double mean_few = 0.0, mean_many = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    mean_few += static_cast<double>(pixel_sparsity(gen_grains(mask, 2, seed)));
    mean_many += static_cast<double>(pixel_sparsity(gen_grains(mask, 8, seed)));
  }
  CHECK(mean_many > mean_few);
  const Vector g = gen_grains_with_support(mask, 60, 2);
  CHECK(pixel_sparsity(g) >= 60);
  CHECK_THROWS_AS(gen_grains(mask, 0, 1), InvalidArgument);
}

}
