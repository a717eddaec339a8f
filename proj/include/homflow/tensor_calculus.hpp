#pragma once

#include <string>
#include <vector>

#include "homflow/lie_structures.hpp"
#include "homflow/numeric.hpp"

namespace homflow {

/// Dense type-(r,s) tensor on p: a multilinear map p^r -> p^{(x)s}.
/// Components are stored covariant-first, row-major (last axis fastest):
/// data[i_1,...,i_r, a_1,...,a_s] is the e_{a_1}(x)...(x)e_{a_s} coefficient
/// of gamma(e_{i_1},...,e_{i_r}).
struct Tensor {
  int p_dim = 0;
  int r = 0;  // covariant slots
  int s = 0;  // contravariant factors
  Vector data;

  static Tensor zeros(int p_dim, int r, int s);
  static Tensor from_matrix_cov2(const Matrix& G);   // (2,0)
  static Tensor from_operator(const Matrix& J);      // (1,1), gamma(e_i) = sum J_{ai} e_a
  Matrix as_matrix_cov2() const;                     // (2,0) -> G_{ij}
  Matrix as_operator() const;                        // (1,1) -> J

  double norm() const { return data.norm(); }
  long size() const { return data.size(); }
  int axes() const { return r + s; }
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double c, const Tensor& t);

/// out[..., i, ...] = sum_m M(i, m) t[..., m, ...] on the given axis.
Tensor mode_apply(const Matrix& M, const Tensor& t, int axis);

/// theta(A)gamma = theta_s(A)gamma - sum over covariant slots of gamma(..., A., ...),
/// the derivative at the identity of the group action below.
Tensor theta_action(const Matrix& A, const Tensor& t);

/// h.gamma = h._s gamma(h^{-1}., ..., h^{-1}.);  equals (h^{-1})^* gamma.
Tensor group_action(const Matrix& h, const Tensor& t);

/// Full antisymmetrization of a (k,0) tensor, and the distance to it.
Tensor antisymmetrize(const Tensor& t);
double antisymmetry_defect(const Tensor& t);

enum class TensorKind { Metric, PseudoMetric, Symplectic, HermitianTriple, ThreeForm, Form };

std::string to_string(TensorKind k);

/// A geometric structure tensor on p with a kind tag.  All kinds hold a
/// single component except the hermitian triple (omega, g, J), stored as
/// three slots with the compatibility constraints revalidated rather than
/// derived.  Kind-specific symmetry and nondegeneracy are checked on
/// construction.
class InvariantTensor {
 public:
  static InvariantTensor metric(const Matrix& G, double tol = 1e-10);
  static InvariantTensor pseudo_metric(const Matrix& G, int sig_p, int sig_q,
                                       double tol = 1e-10);
  static InvariantTensor symplectic(const Matrix& W, double tol = 1e-10);
  static InvariantTensor hermitian_triple(const Matrix& W, const Matrix& G,
                                          const Matrix& J, double tol = 1e-10);
  static InvariantTensor three_form(const Tensor& phi, double tol = 1e-10);
  static InvariantTensor form(const Tensor& t, double tol = 1e-9);

  // standard presets
  static InvariantTensor euclidean(int n);
  static InvariantTensor standard_symplectic(int n2);
  static InvariantTensor standard_hermitian(int n2);
  /// phi = e123 + e145 + e167 + e246 - e257 - e347 - e356 on R^7.
  static InvariantTensor standard_g2();

  TensorKind kind() const { return kind_; }
  int p_dim() const { return p_dim_; }
  const std::vector<Tensor>& slots() const { return slots_; }
  const Tensor& single() const;  // slot 0; throws for multi-slot kinds
  bool multi_slot() const { return slots_.size() > 1; }
  std::pair<int, int> signature() const { return {sig_p_, sig_q_}; }

  Vector flatten() const;
  /// Same kind and shape, components replaced without revalidation
  /// (used along flows, where validity is monitored separately).
  InvariantTensor with_flat(const Vector& flat) const;
  InvariantTensor scaled(double c) const;  // single-slot kinds only

  double norm() const;

 private:
  InvariantTensor() = default;
  TensorKind kind_ = TensorKind::Form;
  int p_dim_ = 0;
  int sig_p_ = 0, sig_q_ = 0;
  std::vector<Tensor> slots_;
};

std::vector<Tensor> theta_action(const Matrix& A, const InvariantTensor& gamma);
InvariantTensor group_action(const Matrix& h, const InvariantTensor& gamma);
double tuple_norm(const std::vector<Tensor>& ts);

/// gl(p) = gl(p)_gamma + q_gamma: the stabilizer {A : theta(A)gamma = 0}
/// and its Frobenius-orthogonal complement.  Both bases are orthonormal
/// under trace(A B^t).
struct StabilizerDecomposition {
  std::vector<Matrix> stab_basis;
  std::vector<Matrix> comp_basis;
  int p_dim = 0;
  /// The Frobenius complement is invariant under the stabilizer for the
  /// metric-attached kinds; for pseudo-metrics the group is noncompact and
  /// invariance is not guaranteed.
  bool complement_invariant = true;

  int stab_dim() const { return static_cast<int>(stab_basis.size()); }
  int comp_dim() const { return static_cast<int>(comp_basis.size()); }
};

StabilizerDecomposition stabilizer_algebra(const InvariantTensor& gamma,
                                           double sv_rel_tol = 1e-9);

Matrix project_to_complement(const Matrix& A, const StabilizerDecomposition& dec);
Matrix project_to_stabilizer(const Matrix& A, const StabilizerDecomposition& dec);

/// Solves theta(Q)gamma = q for the unique Q in span(comp_basis).
/// A least-squares residual above tol * (1 + |q|) means q does not lie in
/// theta(gl(p))gamma and is reported as an error.
class OperatorSolver {
 public:
  OperatorSolver(const InvariantTensor& gamma, const StabilizerDecomposition& dec);
  Matrix solve(const std::vector<Tensor>& q, double tol = 1e-6,
               double* residual_out = nullptr) const;
  Matrix solve(const Tensor& q, double tol = 1e-6,
               double* residual_out = nullptr) const;

 private:
  const StabilizerDecomposition dec_;
  Matrix columns_;  // stacked theta(C_i)gamma
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

Matrix solve_operator_from_tensor(const InvariantTensor& gamma, const Tensor& q,
                                  const StabilizerDecomposition& dec,
                                  double tol = 1e-6, double* residual_out = nullptr);

/// max over a basis Z of k of |theta(ad Z|_p) gamma|.
double adK_invariance_residual(const BracketTensor& mu, const ReductiveSplit& split,
                               const InvariantTensor& gamma);

/// d gamma(X_1,...,X_{k+1}) = sum_{i<j} (-1)^{i+j}
///   gamma(mu(X_i,X_j)_p, X_1,...,^X_i,...,^X_j,...) for an invariant k-form
/// on p; indices of the form are p-relative.
Tensor exterior_differential(const BracketTensor& mu, const ReductiveSplit& split,
                             const Tensor& form, double antisym_tol = 1e-9);

/// True when h (ad k|_p) h^{-1} lies in the span of ad k|_p.
bool is_in_normalizer(const Matrix& h, const BracketTensor& mu,
                      const ReductiveSplit& split, double tol = 1e-8);

}  // namespace homflow
