#include "phasect/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phasect/error.hpp"

namespace phasect {

SparsifyingOperator SparsifyingOperator::identity(Index n) {
  SparseMatrix eye(n, n);
  eye.setIdentity();
  eye.makeCompressed();
  return SparsifyingOperator(std::move(eye), 1);
}

SparsifyingOperator SparsifyingOperator::gradient(const DiskMask& mask) {
  return SparsifyingOperator(GradientOperator(mask).matrix(), 2);
}

double SparsifyingOperator::objective(const Eigen::Ref<const Vector>& x) const {
  const Vector sx = matrix_ * x;
  if (group_size_ == 1) return sx.lpNorm<1>();
  const Index n = sx.size() / 2;
  return (sx.head(n).array().square() + sx.tail(n).array().square()).sqrt().sum();
}

namespace {

// z <- z * r / max(r, |z_group|), groups of one or two components.
void project_dual(Vector& z, double radius, int group_size) {
  if (group_size == 1) {
    z.array() *= radius / z.array().abs().max(radius);
    return;
  }
  const Index n = z.size() / 2;
  for (Index j = 0; j < n; ++j) {
    const double mag = std::hypot(z[j], z[n + j]);
    if (mag > radius) {
      const double f = radius / mag;
      z[j] *= f;
      z[n + j] *= f;
    }
  }
}

template <typename MatrixType>
Solution run_cp(const SolverConfig& cfg, const MatrixType& a, const Eigen::Ref<const Vector>& b,
                const SparsifyingOperator& s, double nu, double step, const Vector* reference) {
  const Index n = a.cols();
  const SparseMatrix& sm = s.matrix();
  const double sigma = step;
  const double tau = step;
  const double theta = 1.0;
  const double radius = cfg.lambda / nu;
  const double b_scale = b.norm() > 0.0 ? b.norm() : 1.0;
  const bool nonneg = cfg.kind == ProblemKind::LP;
  const int log_every = std::max(1, cfg.log_every);
  constexpr int check_every = 10;

  Solution sol;
  Vector x = Vector::Zero(n);
  Vector x_bar = x;
  Vector x_next(n);
  Vector y = Vector::Zero(a.rows());
  Vector z = Vector::Zero(sm.rows());
  Vector ax(a.rows());

  auto record = [&](int iteration) {
    ax.noalias() = a * x;
    HistoryRecord rec{iteration, s.objective(x), (ax - b).norm(), std::nullopt};
    if (reference) rec.image_rmse = (x - *reference).norm() / std::sqrt(static_cast<double>(n));
    sol.history.push_back(rec);
  };

  int k = 0;
  while (k < cfg.max_iter) {
    ax.noalias() = a * x_bar;
    y.noalias() += sigma * (ax - b);
    z.noalias() += (sigma * nu) * (sm * x_bar);
    project_dual(z, radius, s.group_size());
    x_next = x;
    x_next.noalias() -= tau * (a.transpose() * y);
    x_next.noalias() -= (tau * nu) * (sm.transpose() * z);
    if (nonneg) x_next = x_next.cwiseMax(0.0);
    x_bar = x_next + theta * (x_next - x);
    ++k;

    const bool check = k % check_every == 0 || k == cfg.max_iter;
    double change = 0.0;
    if (check || k % log_every == 0) {
      const double xn = x_next.norm();
      change = (x_next - x).norm() / (xn > 0.0 ? xn : 1.0);
    }
    x.swap(x_next);

    if (check && !x.allFinite())
      throw ConvergenceError("solve_cp: non-finite iterate at iteration " + std::to_string(k), k,
                             std::nan(""));
    if (k % log_every == 0) record(k);
    if (check && cfg.feas_tol > 0.0 && change < cfg.feas_tol) {
      ax.noalias() = a * x;
      if ((ax - b).norm() / b_scale < cfg.feas_tol) break;
    }
  }

  if (sol.history.empty() || sol.history.back().iteration != k) record(k);
  sol.iterations_run = k;
  sol.primal_objective = sol.history.back().objective;
  sol.data_residual = sol.history.back().residual;
  sol.x = std::move(x);
  return sol;
}

}  // namespace

Solution solve_cp(const SolverConfig& config, const SensingMatrix& a,
                  const Eigen::Ref<const Vector>& b, const SparsifyingOperator& s,
                  const Vector* reference) {
  if (!(config.lambda > 0.0)) throw InvalidArgument("solve_cp: lambda must be positive");
  if (config.max_iter < 1) throw InvalidArgument("solve_cp: max_iter must be >= 1");
  if (!(config.feas_tol >= 0.0)) throw InvalidArgument("solve_cp: feas_tol must be >= 0");
  if (b.size() != a.rows()) throw DimensionMismatch("solve_cp: data length != matrix rows");
  if (s.cols() != a.cols()) throw DimensionMismatch("solve_cp: sparsifying operator size mismatch");
  if (reference && reference->size() != a.cols())
    throw DimensionMismatch("solve_cp: reference image size mismatch");

  const double norm_a = spectral_norm(a, config.norm_tol);
  const double norm_s = spectral_norm(s.matrix(), config.norm_tol);
  if (norm_s == 0.0) throw InvalidArgument("solve_cp: sparsifying operator has zero norm");
  if (norm_a == 0.0) throw InvalidArgument("solve_cp: sensing matrix has zero norm");
  const double nu = norm_a / norm_s;
  const double lipschitz = spectral_norm_stacked(a, s.matrix(), nu, config.norm_tol);

  return a.visit([&](const auto& m) {
    return run_cp(config, m, b, s, nu, 1.0 / lipschitz, reference);
  });
}

Solution solve_cp(const SolverConfig& config, const SensingMatrix& a,
                  const Eigen::Ref<const Vector>& b, const DiskMask* mask,
                  const Vector* reference) {
  if (config.kind == ProblemKind::TV) {
    if (!mask) throw InvalidArgument("solve_cp: TV needs the disk mask");
    if (mask->n_pixels() != a.cols()) throw DimensionMismatch("solve_cp: mask size != matrix columns");
    return solve_cp(config, a, b, SparsifyingOperator::gradient(*mask), reference);
  }
  return solve_cp(config, a, b, SparsifyingOperator::identity(a.cols()), reference);
}

double default_epsilon(ProblemKind kind) { return kind == ProblemKind::TV ? 1e-3 : 1e-4; }

RecoveryResult check_recovery(const Eigen::Ref<const Vector>& x_star,
                              const Eigen::Ref<const Vector>& x_orig, double epsilon) {
  if (x_star.size() != x_orig.size()) throw DimensionMismatch("check_recovery: size mismatch");
  const double ref = x_orig.norm();
  if (ref == 0.0) throw InvalidArgument("check_recovery: reference image is zero");
  const double err = (x_star - x_orig).norm() / ref;
  return {err, err < epsilon, epsilon};
}

}  // namespace phasect
