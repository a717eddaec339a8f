#pragma once

#include <optional>
#include <string>
#include <vector>

#include "homflow/numeric.hpp"

namespace homflow {

class InvariantTensor;  // tensor_calculus.hpp

/// Splitting g = k + p by index ranges: e_1..e_k span the isotropy
/// subalgebra k, the remaining p_dim vectors span p.
struct ReductiveSplit {
  int k_dim = 0;
  int p_dim = 0;

  int total() const { return k_dim + p_dim; }
  bool in_k(int i) const { return i < k_dim; }
  bool in_p(int i) const { return i >= k_dim; }
  static ReductiveSplit trivial(int n) { return {0, n}; }
};

/// Structure constants of a bilinear antisymmetric bracket mu on R^d:
/// mu(e_i, e_j) = sum_k c[k](i,j) e_k.  Antisymmetry in (i,j) is enforced
/// on construction; whether mu satisfies the Jacobi identity is a separate
/// check (jacobi_residual).
class BracketTensor {
 public:
  explicit BracketTensor(int dim);

  /// comps[k](i,j) must be antisymmetric in (i,j) up to antisym_tol;
  /// the stored constants are exactly antisymmetrized.
  static BracketTensor from_components(std::vector<Matrix> comps,
                                       double antisym_tol = 1e-9);
  static BracketTensor from_flat(int dim, const Vector& flat,
                                 double antisym_tol = 1e-9);
  /// No antisymmetry check; used on flow states, which preserve
  /// antisymmetry exactly.
  static BracketTensor from_flat_unchecked(int dim, const Vector& flat);

  int dim() const { return dim_; }
  const Matrix& comp(int k) const { return comps_[k]; }
  double component(int k, int i, int j) const { return comps_[k](i, j); }
  void set_entry(int k, int i, int j, double v);  // sets (i,j) and -(j,i)

  Vector apply(const Vector& x, const Vector& y) const;
  Vector apply_basis(int i, int j) const;  // mu(e_i, e_j)
  Matrix ad(const Vector& x) const;        // y -> mu(x, y)
  Matrix ad_basis(int i) const;
  /// p-block of ad(e_i) as a p_dim x p_dim matrix.
  Matrix ad_p(int i, const ReductiveSplit& split) const;

  Vector flatten() const;  // layout: k-major, then row-major in (i,j)
  double norm() const;     // Frobenius norm of the components

  bool is_zero(double tol = 0.0) const;

 private:
  int dim_;
  std::vector<Matrix> comps_;
};

/// max over basis triples i<j<l of |mu(mu(e_i,e_j),e_l) + cyclic|_2;
/// zero exactly when mu is a Lie bracket.
double jacobi_residual(const BracketTensor& mu);

/// B(X,Y) = trace(ad X ad Y), as a symmetric matrix in the fixed basis.
Matrix killing_form(const BracketTensor& mu);

/// The scaling action c.mu: identity on k x k and k x p; on p x p the
/// k-component picks up c^2 and the p-component c.  Coincides with the
/// basis change diag(I_k, c^{-1} I_p) when mu(k,k) in k and mu(k,p) in p.
BracketTensor scale_bracket(const BracketTensor& mu, const ReductiveSplit& split,
                            double c);

/// (hbar.mu)(x,y) = hbar mu(hbar^{-1}x, hbar^{-1}y).  When a split with
/// k_dim > 0 is given, hbar must be block diagonal with respect to it.
BracketTensor act_basis_change(const Matrix& hbar, const BracketTensor& mu,
                               const ReductiveSplit* split = nullptr,
                               double block_tol = 1e-10);

struct DerivationBasis {
  std::vector<Matrix> elements;  // orthonormal under the Frobenius pairing
  bool restricted = false;       // D(k) in k imposed
  int dim() const { return static_cast<int>(elements.size()); }
};

enum class DerivationConstraint {
  Full,              // all of Der(g)
  PreserveIsotropy,  // D(k) in k
  IsotropyBlockZero  // D = diag(0, D_p): k rows and k columns of D vanish
};

/// Basis of the solution space of D mu(e_i,e_j) = mu(De_i,e_j) + mu(e_i,De_j),
/// computed as an SVD nullspace with threshold sv_rel_tol relative to the
/// largest singular value.
DerivationBasis derivation_algebra(const BracketTensor& mu,
                                   const ReductiveSplit* split = nullptr,
                                   DerivationConstraint constraint =
                                       DerivationConstraint::PreserveIsotropy,
                                   double sv_rel_tol = 1e-9);

/// max over pairs of |D mu(e_i,e_j) - mu(De_i,e_j) - mu(e_i,De_j)|_2.
double derivation_defect(const BracketTensor& mu, const Matrix& D);

/// Homogeneous-space admissibility of (mu, split, gamma).  Condition (ii),
/// closedness of the isotropy subgroup, is not a finite-dimensional linear
/// condition and is reported as not decidable numerically.
struct AdmissibilityReport {
  bool cond_i = false;    // mu(k,k) in k and mu(k,p) in p
  double res_i = 0.0;
  bool cond_ii_assumed = true;  // taken on the user's assertion
  std::string cond_ii_note;
  bool cond_iii = false;  // Z in k with mu(Z, p) = 0 forces Z = 0
  double res_iii = 0.0;   // smallest singular value of Z -> ad(Z)|_p
  bool cond_iv = false;   // theta(ad Z|_p) gamma = 0 for Z in k
  double res_iv = 0.0;

  bool all_pass() const { return cond_i && cond_iii && cond_iv; }
};

AdmissibilityReport check_admissibility(const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma,
                                        double tol = 1e-8);

}  // namespace homflow
