#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "phasect/error.hpp"
#include "phasect/phasediagram.hpp"

namespace phasect {

Lattice to_lattice(const RateGrid& grid) {
  const auto ni = static_cast<Index>(grid.sparsity_coords.size());
  const auto nj = static_cast<Index>(grid.sampling_coords.size());
  if (grid.rate.rows() != ni || grid.rate.cols() != nj)
    throw DimensionMismatch("to_lattice: rate matrix does not match coordinates");
  const Vector sparsity = Eigen::Map<const Vector>(grid.sparsity_coords.data(), ni);
  const Vector sampling = Eigen::Map<const Vector>(grid.sampling_coords.data(), nj);
  Lattice lat;
  if (grid.kind == DiagramKind::ALMT) {
    lat.x = sparsity;
    lat.y = sampling;
    lat.values = grid.rate;
  } else {
    lat.x = sampling;
    lat.y = sparsity;
    lat.values = grid.rate.transpose();
  }
  return lat;
}

namespace {

using Point = Eigen::Vector2d;

struct Segment {
  std::int64_t e0;
  std::int64_t e1;
  Point p0;
  Point p1;
};

// Edge ids: horizontal edge (ix, iy)-(ix+1, iy) and vertical edge (ix, iy)-(ix, iy+1).
std::int64_t h_edge(Index ix, Index iy, Index ny) { return 2 * (ix * ny + iy); }
std::int64_t v_edge(Index ix, Index iy, Index ny) { return 2 * (ix * ny + iy) + 1; }

Point lerp(const Point& a, const Point& b, double va, double vb, double level) {
  const double t = (level - va) / (vb - va);
  return a + t * (b - a);
}

double arc_length(const std::vector<Point>& pts) {
  double len = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) len += (pts[k] - pts[k - 1]).norm();
  return len;
}

Curve to_curve(std::vector<Point> pts, Coords coords) {
  if (pts.size() > 1 && pts.front().x() > pts.back().x()) std::reverse(pts.begin(), pts.end());
  Curve c;
  c.coords = coords;
  c.kind = CurveKind::empirical_contour;
  c.points.resize(static_cast<Index>(pts.size()), 2);
  for (std::size_t k = 0; k < pts.size(); ++k) c.points.row(static_cast<Index>(k)) = pts[k].transpose();
  return c;
}

}  // namespace

ContourResult extract_contour(const Lattice& lat, double level, Coords coords) {
  const Index nx = lat.x.size();
  const Index ny = lat.y.size();
  if (lat.values.rows() != nx || lat.values.cols() != ny)
    throw DimensionMismatch("extract_contour: lattice shape");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("contour level must lie in (0, 1)");

  std::vector<Segment> segments;
  for (Index ix = 0; ix + 1 < nx; ++ix) {
    for (Index iy = 0; iy + 1 < ny; ++iy) {
      const double v00 = lat.values(ix, iy), v10 = lat.values(ix + 1, iy);
      const double v01 = lat.values(ix, iy + 1), v11 = lat.values(ix + 1, iy + 1);
      if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11))
        continue;
      const Point p00(lat.x(ix), lat.y(iy)), p10(lat.x(ix + 1), lat.y(iy));
      const Point p01(lat.x(ix), lat.y(iy + 1)), p11(lat.x(ix + 1), lat.y(iy + 1));
      const bool a00 = v00 >= level, a10 = v10 >= level, a01 = v01 >= level, a11 = v11 >= level;

      // bottom, right, top, left
      struct Crossing {
        bool hit;
        std::int64_t id;
        Point p;
      };
      Crossing e[4] = {
          {a00 != a10, h_edge(ix, iy, ny), {}},
          {a10 != a11, v_edge(ix + 1, iy, ny), {}},
          {a01 != a11, h_edge(ix, iy + 1, ny), {}},
          {a00 != a01, v_edge(ix, iy, ny), {}},
      };
      if (e[0].hit) e[0].p = lerp(p00, p10, v00, v10, level);
      if (e[1].hit) e[1].p = lerp(p10, p11, v10, v11, level);
      if (e[2].hit) e[2].p = lerp(p01, p11, v01, v11, level);
      if (e[3].hit) e[3].p = lerp(p00, p01, v00, v01, level);

      auto add = [&](int a, int b) { segments.push_back({e[a].id, e[b].id, e[a].p, e[b].p}); };
      const int hits = e[0].hit + e[1].hit + e[2].hit + e[3].hit;
      if (hits == 2) {
        int first = -1, second = -1;
        for (int k = 0; k < 4; ++k)
          if (e[k].hit) (first < 0 ? first : second) = k;
        add(first, second);
      } else if (hits == 4) {
        const bool centre = 0.25 * (v00 + v10 + v01 + v11) >= level;
        // a00 == a11 here: the diagonal pair (00, 11) shares a side.
        if (a00 == centre) {
          add(0, 1);  // isolate corner 10
          add(3, 2);  // isolate corner 01
        } else {
          add(0, 3);  // isolate corner 00
          add(1, 2);  // isolate corner 11
        }
      }
    }
  }

  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_edge;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    by_edge[segments[k].e0].push_back(k);
    by_edge[segments[k].e1].push_back(k);
  }
  std::vector<bool> used(segments.size(), false);

  auto other_segment = [&](std::int64_t edge, std::size_t self) -> std::optional<std::size_t> {
    for (std::size_t k : by_edge[edge])
      if (k != self && !used[k]) return k;
    return std::nullopt;
  };

  // Walks from `seg` outward through `edge`, appending points.
  auto walk = [&](std::size_t seg, std::int64_t edge, std::vector<Point>& pts) {
    std::size_t cur = seg;
    while (auto nxt = other_segment(edge, cur)) {
      used[*nxt] = true;
      const Segment& s = segments[*nxt];
      if (s.e0 == edge) {
        pts.push_back(s.p1);
        edge = s.e1;
      } else {
        pts.push_back(s.p0);
        edge = s.e0;
      }
      cur = *nxt;
    }
  };

  std::vector<std::vector<Point>> lines;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    used[k] = true;
    std::vector<Point> forward{segments[k].p0, segments[k].p1};
    walk(k, segments[k].e1, forward);
    std::vector<Point> backward;
    walk(k, segments[k].e0, backward);
    std::vector<Point> pts(backward.rbegin(), backward.rend());
    pts.insert(pts.end(), forward.begin(), forward.end());
    lines.push_back(std::move(pts));
  }

  ContourResult out;
  if (lines.empty()) {
    out.main.coords = coords;
    out.main.kind = CurveKind::empirical_contour;
    return out;
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const auto& a, const auto& b) { return arc_length(a) > arc_length(b); });
  out.main = to_curve(lines.front(), coords);
  for (std::size_t k = 1; k < lines.size(); ++k) out.extras.push_back(to_curve(lines[k], coords));
  return out;
}

ContourResult extract_contour(const RateGrid& grid, double level) {
  return extract_contour(to_lattice(grid), level,
                         grid.kind == DiagramKind::DT ? Coords::DT : Coords::ALMT);
}

std::optional<double> line_crossing(const Vector& pos, const Vector& v, double level) {
  if (pos.size() != v.size()) throw DimensionMismatch("line_crossing: size mismatch");
  std::vector<double> hits;
  for (Index k = 0; k + 1 < v.size(); ++k) {
    const double a = v(k), b = v(k + 1);
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    if ((a >= level) == (b >= level)) continue;
    hits.push_back(pos(k) + (level - a) / (b - a) * (pos(k + 1) - pos(k)));
  }
  if (hits.empty()) return std::nullopt;
  if (hits.size() == 1) return hits.front();

  double sum = 0.0, first = NAN, last = NAN, lo = INFINITY, hi = -INFINITY;
  int count = 0;
  for (Index k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v(k))) continue;
    if (count == 0) first = v(k);
    last = v(k);
    sum += v(k);
    lo = std::min(lo, pos(k));
    hi = std::max(hi, pos(k));
    ++count;
  }
  const double mean = sum / count;
  const double centre = lo + (last >= first ? 1.0 - mean : mean) * (hi - lo);
  return *std::min_element(hits.begin(), hits.end(), [&](double a, double b) {
    return std::abs(a - centre) < std::abs(b - centre);
  });
}

std::optional<double> contour_ordinate_at(const Lattice& lattice, double level, Index ix) {
  if (ix < 0 || ix >= lattice.x.size()) throw InvalidArgument("contour_ordinate_at: index");
  return line_crossing(lattice.y, lattice.values.row(ix).transpose(), level);
}

std::vector<std::optional<double>> transition_width(const RateGrid& grid, double lo, double hi) {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw InvalidArgument("transition_width: need 0 < lo < hi < 1");
  const Lattice lat = to_lattice(grid);
  std::vector<std::optional<double>> out;
  for (Index ix = 0; ix < lat.x.size(); ++ix) {
    const auto a = contour_ordinate_at(lat, lo, ix);
    const auto b = contour_ordinate_at(lat, hi, ix);
    if (a && b) out.push_back(std::abs(*b - *a));
    else out.push_back(std::nullopt);
  }
  return out;
}

}  // namespace phasect
