#include "homflow/numeric.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace homflow {

NullspaceSplit nullspace_split(const Matrix& M, double rel_tol) {
  const int n = static_cast<int>(M.cols());
  NullspaceSplit out;
  if (M.rows() == 0 || M.norm() == 0.0) {
    out.kernel = Matrix::Identity(n, n);
    out.range = Matrix(n, 0);
    out.singular_values = Vector::Zero(std::min<int>(M.rows(), n));
    out.rank = 0;
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  out.singular_values = svd.singularValues();
  const double cut = rel_tol * out.singular_values(0);
  int rank = 0;
  for (int i = 0; i < out.singular_values.size(); ++i)
    if (out.singular_values(i) > cut) ++rank;
  out.rank = rank;
  const Matrix& V = svd.matrixV();
  out.range = V.leftCols(rank);
  out.kernel = V.rightCols(n - rank);
  return out;
}

int numerical_rank(const Matrix& M, double rel_tol) {
  if (M.rows() == 0 || M.cols() == 0 || M.norm() == 0.0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& sv = svd.singularValues();
  const double cut = rel_tol * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++rank;
  return rank;
}

Matrix matrix_exponential(const Matrix& A) { return A.exp(); }

Vector vec_rowmajor(const Matrix& A) {
  Vector v(A.size());
  int idx = 0;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) v(idx++) = A(i, j);
  return v;
}

Matrix unvec_rowmajor(const Vector& v, int rows, int cols) {
  Matrix A(rows, cols);
  int idx = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = v(idx++);
  return A;
}

double antisymmetry_defect(const Matrix& A) {
  return (A + A.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace homflow
