#pragma once

#include <Eigen/Dense>
#include <vector>

namespace homflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Kernel / row-space split of a linear map, computed by SVD.
/// Singular values below rel_tol * sigma_max are treated as zero.
struct NullspaceSplit {
  Matrix kernel;  ///< columns span ker(M), orthonormal
  Matrix range;   ///< columns span the row space of M (orthogonal complement of ker)
  Vector singular_values;
  int rank = 0;
};

NullspaceSplit nullspace_split(const Matrix& M, double rel_tol = 1e-9);

int numerical_rank(const Matrix& M, double rel_tol = 1e-9);

Matrix matrix_exponential(const Matrix& A);

/// Row-major flattening of a matrix, and its inverse.
Vector vec_rowmajor(const Matrix& A);
Matrix unvec_rowmajor(const Vector& v, int rows, int cols);

/// max_ij |A_ij + A_ji|
double antisymmetry_defect(const Matrix& A);

}  // namespace homflow
