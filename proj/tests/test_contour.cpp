#include "doctest.h"
#include "phasect/error.hpp"
#include "phasect/phasediagram.hpp"

using namespace phasect;

namespace {

Lattice lattice(Index nx, Index ny) {
  Lattice l;
  l.x = Vector::LinSpaced(nx, 0.0, 1.0);
  l.y = Vector::LinSpaced(ny, 0.0, 1.0);
  l.values = Matrix::Zero(nx, ny);
  return l;
}

RateGrid grid_from(const Lattice& l) {
  RateGrid g;
  g.kind = DiagramKind::ALMT;
  g.sparsity_coords.assign(l.x.data(), l.x.data() + l.x.size());
  g.sampling_coords.assign(l.y.data(), l.y.data() + l.y.size());
  g.rate = l.values;
  return g;
}

}  // namespace

TEST_SUITE("contour") {

TEST_CASE("step grid: contour halfway between the two rows") {
  Lattice l = lattice(5, 11);
  const Index k = 6;
  for (Index iy = k; iy < 11; ++iy) l.values.col(iy).setOnes();
  const ContourResult c = extract_contour(l, 0.5, Coords::ALMT);
  REQUIRE_FALSE(c.empty());
  CHECK(c.extras.empty());
  CHECK(c.main.size() == 5);
  const double mid = 0.5 * (l.y(k - 1) + l.y(k));
  for (Index p = 0; p < c.main.size(); ++p) CHECK(c.main.points(p, 1) == doctest::Approx(mid));
  CHECK(c.main.points(0, 0) == 0.0);
  CHECK(c.main.points(4, 0) == 1.0);
}

TEST_CASE("ramp: linear interpolation along edges") {
  Lattice l = lattice(4, 6);
  for (Index ix = 0; ix < 4; ++ix) l.values.row(ix) = l.y.transpose();
  const ContourResult c = extract_contour(l, 0.3, Coords::ALMT);
  for (Index p = 0; p < c.main.size(); ++p) CHECK(c.main.points(p, 1) == doctest::Approx(0.3));
}

TEST_CASE("no crossing gives an empty contour") {
  const Lattice l = lattice(4, 4);
  CHECK(extract_contour(l, 0.5, Coords::ALMT).empty());
  CHECK_THROWS_AS(extract_contour(l, 1.0, Coords::ALMT), InvalidArgument);
}

TEST_CASE("separate branches: the longest is main") {
  Lattice l = lattice(9, 9);
  // a long step across the grid plus an isolated bump
  for (Index iy = 5; iy < 9; ++iy) l.values.col(iy).setOnes();
  l.values(2, 1) = 1.0;
  const ContourResult c = extract_contour(l, 0.5, Coords::ALMT);
  CHECK(c.extras.size() == 1);
  CHECK(c.main.size() == 9);
  CHECK(c.extras[0].size() == 5);  // closed diamond around the bump
}

TEST_CASE("saddle is split by the centre value") {
  Lattice l = lattice(2, 2);
  l.values << 1, 0, 0, 1;
  auto partner = [](const ContourResult& c, double x, double y) {
    std::vector<Curve> all{c.main};
    all.insert(all.end(), c.extras.begin(), c.extras.end());
    for (const Curve& k : all) {
      REQUIRE(k.size() == 2);
      for (Index p = 0; p < 2; ++p)
        if (std::abs(k.points(p, 0) - x) < 1e-12 && std::abs(k.points(p, 1) - y) < 1e-12)
          return Eigen::Vector2d(k.points.row(1 - p).transpose());
    }
    FAIL("point not on contour");
    return Eigen::Vector2d();
  };
  // centre 0.5 above 0.4: the low corners (1,0) and (0,1) are cut off
  const ContourResult hi = extract_contour(l, 0.4, Coords::ALMT);
  CHECK(hi.extras.size() == 1);
  const Eigen::Vector2d a = partner(hi, 0.6, 0.0);
  CHECK(a.x() == doctest::Approx(1.0));
  CHECK(a.y() == doctest::Approx(0.4));
  // centre below 0.6: the high corners (0,0) and (1,1) are cut off
  const ContourResult lo = extract_contour(l, 0.6, Coords::ALMT);
  CHECK(lo.extras.size() == 1);
  const Eigen::Vector2d b = partner(lo, 0.4, 0.0);
  CHECK(b.x() == doctest::Approx(0.0));
  CHECK(b.y() == doctest::Approx(0.4));
}

TEST_CASE("non-finite cells are skipped") {
  Lattice l = lattice(3, 4);
  for (Index iy = 2; iy < 4; ++iy) l.values.col(iy).setOnes();
  l.values(2, 1) = std::nan("");
  const ContourResult c = extract_contour(l, 0.5, Coords::ALMT);
  CHECK(c.main.size() == 2);
}

TEST_CASE("line crossing chooses the branch nearest the band centre") {
  Vector pos = Vector::LinSpaced(11, 0.0, 1.0);
  Vector v(11);
  v << 0, 0, 1, 0, 0, 0, 0, 1, 1, 1, 1;
  // mean 5/11; increasing; centre at 1 - 5/11 = 0.545
  const auto c = line_crossing(pos, v, 0.5);
  REQUIRE(c);
  CHECK(*c == doctest::Approx(0.65));
  Vector flat = Vector::Zero(11);
  CHECK_FALSE(line_crossing(pos, flat, 0.5));
}

TEST_CASE("transition width of a ramp and a step") {
  Lattice ramp = lattice(3, 11);
  for (Index ix = 0; ix < 3; ++ix) ramp.values.row(ix) = ramp.y.transpose();
  for (const auto& w : transition_width(grid_from(ramp))) {
    REQUIRE(w);
    CHECK(*w == doctest::Approx(0.9));
  }
  Lattice step = lattice(3, 11);
  for (Index iy = 4; iy < 11; ++iy) step.values.col(iy).setOnes();
  for (const auto& w : transition_width(grid_from(step))) {
    REQUIRE(w);
    CHECK(*w <= 0.1 + 1e-12);
  }
  const auto none = transition_width(grid_from(lattice(3, 5)));
  CHECK_FALSE(none[0]);
}

TEST_CASE("DT lattices put delta on the abscissa") {
  RateGrid g;
  g.kind = DiagramKind::DT;
  g.sparsity_coords = {0.25, 0.5, 0.75};
  g.sampling_coords = {0.2, 0.4};
  g.rate = Matrix::Zero(3, 2);
  g.rate(0, 1) = 0.7;
  const Lattice l = to_lattice(g);
  CHECK(l.x.size() == 2);
  CHECK(l.y.size() == 3);
  CHECK(l.values(1, 0) == 0.7);
  CHECK(extract_contour(g, 0.5).main.coords == Coords::DT);
}

}
