#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "phasect/error.hpp"
#include "phasect/phantoms.hpp"
#include "phasect/sensing.hpp"
#include "phasect/types.hpp"

namespace phasect {

struct SolverConfig {
  ProblemKind kind = ProblemKind::P1;
  double lambda = 1e-4;
  int max_iter = 20000;
  /// Early exit when ||Ax - b|| / ||b|| and the relative iterate change
  /// both fall below this value. Zero runs exactly max_iter iterations.
  double feas_tol = 1e-8;
  int log_every = 100;
  double norm_tol = 1e-8;
};

struct HistoryRecord {
  int iteration;
  double objective;
  double residual;
  std::optional<double> image_rmse;
};

struct Solution {
  Vector x;
  int iterations_run = 0;
  double primal_objective = 0.0;
  double data_residual = 0.0;
  /// Only set by the LP oracle.
  std::optional<double> duality_gap;
  std::vector<HistoryRecord> history;
};

/// Sparsifying operator S with its group structure: identity (groups of
/// one component) or the stacked gradient (groups are (gx_j, gy_j) pairs).
class SparsifyingOperator {
 public:
  static SparsifyingOperator identity(Index n);
  static SparsifyingOperator gradient(const DiskMask& mask);

  const SparseMatrix& matrix() const noexcept { return matrix_; }
  /// Number of components per group (1 or 2).
  int group_size() const noexcept { return group_size_; }
  Index cols() const noexcept { return matrix_.cols(); }

  /// Regulariser value: sum over groups of the group 2-norm of S x.
  double objective(const Eigen::Ref<const Vector>& x) const;

 private:
  SparsifyingOperator(SparseMatrix m, int group_size)
      : matrix_(std::move(m)), group_size_(group_size) {}

  SparseMatrix matrix_;
  int group_size_;
};

/// Chambolle-Pock primal-dual iteration for
///   min ||S x||_{1 or TV}  s.t.  A x = b   (and x >= 0 for LP).
/// Throws ConvergenceError if an iterate becomes non-finite.
Solution solve_cp(const SolverConfig& config, const SensingMatrix& a,
                  const Eigen::Ref<const Vector>& b, const SparsifyingOperator& s,
                  const Vector* reference = nullptr);

/// Chooses S from config.kind; `mask` is required for TV.
Solution solve_cp(const SolverConfig& config, const SensingMatrix& a,
                  const Eigen::Ref<const Vector>& b, const DiskMask* mask = nullptr,
                  const Vector* reference = nullptr);

/// Raised by the LP oracle for an inconsistent system. `certificate` is a
/// vector y with A^T y = 0 (P1) or A^T y <= 0 (LP) and b^T y > 0.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, Vector certificate)
      : Error(what), certificate_(std::move(certificate)) {}
  const Vector& certificate() const noexcept { return certificate_; }

 private:
  Vector certificate_;
};

struct LpOracleOptions {
  /// Upper bound on LP variables after the recast (2N for P1, N for LP).
  Index max_variables = 2000;
  int max_iter = 200;
  double gap_tol = 1e-9;
  double feas_tol = 1e-10;
  /// Stalled runs return their best iterate when its residuals and gap
  /// are within this relative tolerance.
  double accept_tol = 1e-7;
};

/// Exact small-scale solver: P1 (recast x = u - v) or LP as a
/// standard-form linear program, solved by a Mehrotra predictor-corrector
/// interior-point method followed by a vertex purification step.
Solution lp_oracle(ProblemKind kind, const SensingMatrix& a, const Eigen::Ref<const Vector>& b,
                   const LpOracleOptions& opts = {});

/// Standard-form LP: min c^T x s.t. A x = b, x >= 0.
struct StandardFormResult {
  Vector x;
  Vector y;
  Vector z;
  int iterations = 0;
  double gap = 0.0;
};
StandardFormResult solve_standard_lp(const Matrix& a, const Vector& b, const Vector& c,
                                     const LpOracleOptions& opts = {});

struct RecoveryResult {
  double relative_error;
  bool success;
  double threshold;
};

/// Default recovery threshold: 1e-4 for P1/LP, 1e-3 for TV.
double default_epsilon(ProblemKind kind);

/// success iff ||x* - x_orig|| / ||x_orig|| < epsilon (strict).
RecoveryResult check_recovery(const Eigen::Ref<const Vector>& x_star,
                              const Eigen::Ref<const Vector>& x_orig, double epsilon);

}  // namespace phasect
