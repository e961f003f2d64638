#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "phasect/error.hpp"
#include "phasect/solvers.hpp"

namespace phasect {

namespace {

double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

// Factorisation of A diag(d) A^T; a small diagonal shift keeps it usable
// once the iterates approach a degenerate vertex.
class NormalSystem {
 public:
  NormalSystem(const Matrix& a, const Vector& d) : m_(a * d.asDiagonal() * a.transpose()) {
    Matrix m = m_;
    const double shift = 1e-14 * std::max(1.0, m.diagonal().maxCoeff());
    for (int attempt = 0; attempt < 6; ++attempt) {
      llt_.compute(m);
      if (llt_.info() == Eigen::Success) return;
      m.diagonal().array() += shift * std::pow(100.0, attempt);
    }
    throw Error("lp_oracle: normal equations are not positive definite");
  }
  // Iterative refinement against the unshifted matrix.
  Vector solve(const Vector& r) const {
    Vector y = llt_.solve(r);
    double res = (r - m_ * y).norm();
    for (int k = 0; k < 3 && res > 1e-15 * (1.0 + r.norm()); ++k) {
      const Vector next = y + llt_.solve(r - m_ * y);
      const double res_next = (r - m_ * next).norm();
      if (!(res_next < res)) break;
      y = next;
      res = res_next;
    }
    return y;
  }

 private:
  Matrix m_;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace

StandardFormResult solve_standard_lp(const Matrix& a, const Vector& b, const Vector& c,
                                     const LpOracleOptions& opts) {
  const Index m = a.rows();
  const Index n = a.cols();
  if (b.size() != m || c.size() != n) throw DimensionMismatch("standard LP: dimension mismatch");

  // Mehrotra's starting point.
  Eigen::LLT<Matrix> aat(a * a.transpose());
  if (aat.info() != Eigen::Success) throw Error("standard LP: A must have full row rank");
  Vector x = a.transpose() * aat.solve(b);
  Vector y = aat.solve(a * c);
  Vector z = c - a.transpose() * y;
  x.array() += std::max(-1.5 * x.minCoeff(), 0.0);
  z.array() += std::max(-1.5 * z.minCoeff(), 0.0);
  const double xz = x.dot(z);
  if (xz > 0.0) {
    x.array() += 0.5 * xz / z.sum();
    z.array() += 0.5 * xz / x.sum();
  } else {
    x.array() += 1.0;
    z.array() += 1.0;
  }

  const double b_scale = 1.0 + b.norm();
  const double c_scale = 1.0 + c.norm();
  StandardFormResult res;
  // Best iterate seen, by the largest of the three relative residuals.
  StandardFormResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector rp = b - a * x;
    const Vector rd = c - a.transpose() * y - z;
    const double primal = c.dot(x);
    const double dual = b.dot(y);
    const double mu = x.dot(z) / static_cast<double>(n);
    res.iterations = it;
    if (rp.norm() / b_scale <= opts.feas_tol && rd.norm() / c_scale <= opts.feas_tol &&
        std::abs(primal - dual) <= opts.gap_tol * (1.0 + std::abs(primal))) {
      res.x = x;
      res.y = y;
      res.z = z;
      res.gap = std::abs(primal - dual);
      return res;
    }
    const double merit = std::max({rp.norm() / b_scale, rd.norm() / c_scale,
                                   std::abs(primal - dual) / (1.0 + std::abs(primal))});
    if (merit < best_merit) {
      best_merit = merit;
      best.x = x;
      best.y = y;
      best.z = z;
      best.iterations = it;
      best.gap = std::abs(primal - dual);
    }
    // Past this point the normal matrix is numerically singular.
    if (mu < 1e-24 * (1.0 + std::abs(primal)) || merit > 1e4 * best_merit) break;

    const Vector d = x.cwiseQuotient(z);
    const NormalSystem normal(a, d);
    auto direction = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& dz) {
      const Vector zinv_rc = rc.cwiseQuotient(z);
      dy = normal.solve(rp - a * (zinv_rc - d.cwiseProduct(rd)));
      dz = rd - a.transpose() * dy;
      dx = zinv_rc - d.cwiseProduct(dz);
    };

    Vector dx, dy, dz;
    Vector rc = -x.cwiseProduct(z);
    direction(rc, dx, dy, dz);
    const double ap_aff = max_step(x, dx);
    const double ad_aff = max_step(z, dz);
    const double mu_aff = (x + ap_aff * dx).dot(z + ad_aff * dz) / static_cast<double>(n);
    const double centering = std::pow(mu_aff / mu, 3);

    rc.array() += centering * mu - dx.array() * dz.array();
    direction(rc, dx, dy, dz);
    const double eta = std::max(0.9, 1.0 - 10.0 * mu);
    const double ap = std::min(1.0, eta * max_step(x, dx));
    const double ad = std::min(1.0, eta * max_step(z, dz));
    x += ap * dx;
    y += ad * dy;
    z += ad * dz;
    if (!x.allFinite() || !y.allFinite()) break;
  }

  if (best_merit <= opts.accept_tol) return best;

  // Unbounded dual objective with a stalled primal residual signals an
  // infeasible primal; y is then an approximate Farkas ray.
  const Vector rp = b - a * x;
  if (rp.norm() / b_scale > 1e3 * opts.feas_tol && b.dot(y) > 0.0 && y.allFinite())
    throw InfeasibleError("standard LP: primal infeasible", y / y.norm());
  throw ConvergenceError("standard LP: interior-point method did not converge", opts.max_iter,
                         c.dot(x));
}

Solution lp_oracle(ProblemKind kind, const SensingMatrix& sensing, const Eigen::Ref<const Vector>& b,
                   const LpOracleOptions& opts) {
  if (kind == ProblemKind::TV) throw InvalidArgument("lp_oracle: TV has no LP form");
  if (b.size() != sensing.rows()) throw DimensionMismatch("lp_oracle: data length != matrix rows");
  const Index n = sensing.cols();
  const Index vars = kind == ProblemKind::P1 ? 2 * n : n;
  if (vars > opts.max_variables)
    throw InvalidArgument("lp_oracle: " + std::to_string(vars) + " variables exceed the bound " +
                          std::to_string(opts.max_variables));

  const Matrix a = sensing.visit([](const auto& m) -> Matrix { return Matrix(m); });

  Solution sol;
  if (b.cwiseAbs().maxCoeff() == 0.0) {
    sol.x = Vector::Zero(n);
    sol.duality_gap = 0.0;
    return sol;
  }

  // Drop dependent rows and check consistency of A x = b.
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(1e-11);
  const Index rank = qr.rank();
  if (rank == 0) throw InfeasibleError("lp_oracle: zero matrix with nonzero data", b / b.norm());
  std::vector<Index> rows(static_cast<std::size_t>(rank));
  for (Index k = 0; k < rank; ++k) rows[k] = qr.colsPermutation().indices()[k];
  std::sort(rows.begin(), rows.end());
  Matrix ar(rank, n);
  Vector br(rank);
  for (Index k = 0; k < rank; ++k) {
    ar.row(k) = a.row(rows[k]);
    br[k] = b[rows[k]];
  }
  {
    const Vector x_ls = ar.completeOrthogonalDecomposition().solve(br);
    const Vector r = b - a * x_ls;
    if (r.norm() > 1e-9 * (1.0 + b.norm()))
      throw InfeasibleError("lp_oracle: data is not in the range of A", r / r.norm());
  }

  Matrix a_lp;
  if (kind == ProblemKind::P1) {
    a_lp.resize(rank, 2 * n);
    a_lp << ar, -ar;
  } else {
    a_lp = ar;
  }
  const Vector c = Vector::Ones(a_lp.cols());
  StandardFormResult lp = solve_standard_lp(a_lp, br, c, opts);

  // Purify to the vertex identified by the strictly complementary pair.
  {
    std::vector<Index> support;
    for (Index i = 0; i < lp.x.size(); ++i)
      if (lp.x[i] > lp.z[i]) support.push_back(i);
    const auto k = static_cast<Index>(support.size());
    if (k > 0 && k <= rank) {
      Matrix ab(rank, k);
      for (Index j = 0; j < k; ++j) ab.col(j) = a_lp.col(support[j]);
      const Vector xb = ab.colPivHouseholderQr().solve(br);
      Vector cand = Vector::Zero(lp.x.size());
      for (Index j = 0; j < k; ++j) cand[support[j]] = xb[j];
      const double res_old = (a_lp * lp.x - br).norm();
      const double res_new = (a_lp * cand - br).norm();
      if (cand.minCoeff() >= 0.0 && res_new <= std::max(res_old, 1e-13 * (1.0 + br.norm())) &&
          c.dot(cand) <= c.dot(lp.x) + opts.gap_tol * (1.0 + c.dot(lp.x)))
        lp.x = cand;
    }
  }

  sol.iterations_run = lp.iterations;
  sol.x = kind == ProblemKind::P1 ? Vector(lp.x.head(n) - lp.x.tail(n)) : lp.x;
  sol.primal_objective = sol.x.lpNorm<1>();
  sol.data_residual = (a * sol.x - b).norm();
  sol.duality_gap = std::abs(c.dot(lp.x) - br.dot(lp.y));
  return sol;
}

}  // namespace phasect
