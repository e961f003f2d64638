#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>

namespace phasect {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using SparseMatrix = SparseRowMatrix<double>;

enum class ProblemKind { P1, LP, TV };

const char* to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& text);

}  // namespace phasect
