#include "homflow/lie_structures.hpp"

#include <cmath>
#include <stdexcept>

#include "homflow/tensor_calculus.hpp"

namespace homflow {

BracketTensor::BracketTensor(int dim) : dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("BracketTensor: dimension must be positive");
  comps_.assign(dim, Matrix::Zero(dim, dim));
}

BracketTensor BracketTensor::from_components(std::vector<Matrix> comps,
                                             double antisym_tol) {
  const int d = static_cast<int>(comps.size());
  BracketTensor mu(d);
  double scale = 1.0;
  for (const Matrix& c : comps) scale = std::max(scale, c.cwiseAbs().maxCoeff());
  for (int k = 0; k < d; ++k) {
    if (comps[k].rows() != d || comps[k].cols() != d)
      throw std::invalid_argument("BracketTensor: component shape mismatch");
    if (antisymmetry_defect(comps[k]) > antisym_tol * scale)
      throw std::invalid_argument("BracketTensor: components not antisymmetric");
    mu.comps_[k] = 0.5 * (comps[k] - comps[k].transpose());
  }
  return mu;
}

BracketTensor BracketTensor::from_flat(int dim, const Vector& flat,
                                       double antisym_tol) {
  if (flat.size() != static_cast<long>(dim) * dim * dim)
    throw std::invalid_argument("BracketTensor: flat size mismatch");
  std::vector<Matrix> comps(dim);
  for (int k = 0; k < dim; ++k)
    comps[k] = unvec_rowmajor(flat.segment(static_cast<long>(k) * dim * dim, dim * dim), dim, dim);
  return from_components(std::move(comps), antisym_tol);
}

BracketTensor BracketTensor::from_flat_unchecked(int dim, const Vector& flat) {
  BracketTensor mu(dim);
  for (int k = 0; k < dim; ++k)
    mu.comps_[k] = unvec_rowmajor(flat.segment(static_cast<long>(k) * dim * dim, dim * dim), dim, dim);
  return mu;
}

void BracketTensor::set_entry(int k, int i, int j, double v) {
  if (i == j && v != 0.0)
    throw std::invalid_argument("BracketTensor: mu(e_i,e_i) must vanish");
  comps_[k](i, j) = v;
  comps_[k](j, i) = -v;
}

Vector BracketTensor::apply(const Vector& x, const Vector& y) const {
  Vector out(dim_);
  for (int k = 0; k < dim_; ++k) out(k) = x.dot(comps_[k] * y);
  return out;
}

Vector BracketTensor::apply_basis(int i, int j) const {
  Vector out(dim_);
  for (int k = 0; k < dim_; ++k) out(k) = comps_[k](i, j);
  return out;
}

Matrix BracketTensor::ad(const Vector& x) const {
  Matrix out(dim_, dim_);
  for (int k = 0; k < dim_; ++k) out.row(k) = x.transpose() * comps_[k];
  return out;
}

Matrix BracketTensor::ad_basis(int i) const {
  Matrix out(dim_, dim_);
  for (int k = 0; k < dim_; ++k) out.row(k) = comps_[k].row(i);
  return out;
}

Matrix BracketTensor::ad_p(int i, const ReductiveSplit& split) const {
  if (split.total() != dim_)
    throw std::invalid_argument("ad_p: split does not match bracket dimension");
  return ad_basis(i).block(split.k_dim, split.k_dim, split.p_dim, split.p_dim);
}

Vector BracketTensor::flatten() const {
  Vector flat(static_cast<long>(dim_) * dim_ * dim_);
  for (int k = 0; k < dim_; ++k)
    flat.segment(static_cast<long>(k) * dim_ * dim_, dim_ * dim_) = vec_rowmajor(comps_[k]);
  return flat;
}

double BracketTensor::norm() const {
  double s = 0.0;
  for (const Matrix& c : comps_) s += c.squaredNorm();
  return std::sqrt(s);
}

bool BracketTensor::is_zero(double tol) const { return norm() <= tol; }

double jacobi_residual(const BracketTensor& mu) {
  const int d = mu.dim();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int l = j + 1; l < d; ++l) {
        Vector ei = Vector::Unit(d, i), ej = Vector::Unit(d, j), el = Vector::Unit(d, l);
        Vector cyc = mu.apply(mu.apply_basis(i, j), el) +
                     mu.apply(mu.apply_basis(j, l), ei) +
                     mu.apply(mu.apply_basis(l, i), ej);
        worst = std::max(worst, cyc.norm());
      }
  return worst;
}

Matrix killing_form(const BracketTensor& mu) {
  const int d = mu.dim();
  std::vector<Matrix> ads(d);
  for (int i = 0; i < d; ++i) ads[i] = mu.ad_basis(i);
  Matrix B(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      B(i, j) = (ads[i] * ads[j]).trace();
      B(j, i) = B(i, j);
    }
  return B;
}

BracketTensor scale_bracket(const BracketTensor& mu, const ReductiveSplit& split,
                            double c) {
  if (c == 0.0) throw std::invalid_argument("scale_bracket: c must be nonzero");
  if (split.total() != mu.dim())
    throw std::invalid_argument("scale_bracket: split does not match bracket dimension");
  const int d = mu.dim();
  const int kd = split.k_dim;
  std::vector<Matrix> comps(d);
  for (int k = 0; k < d; ++k) {
    comps[k] = mu.comp(k);
    const double f = (k < kd) ? c * c : c;
    comps[k].block(kd, kd, split.p_dim, split.p_dim) *= f;
  }
  return BracketTensor::from_components(std::move(comps), 1e-6);
}

BracketTensor act_basis_change(const Matrix& hbar, const BracketTensor& mu,
                               const ReductiveSplit* split, double block_tol) {
  const int d = mu.dim();
  if (hbar.rows() != d || hbar.cols() != d)
    throw std::invalid_argument("act_basis_change: shape mismatch");
  Eigen::FullPivLU<Matrix> lu(hbar);
  if (!lu.isInvertible())
    throw std::invalid_argument("act_basis_change: singular basis change");
  if (split && split->k_dim > 0) {
    const int kd = split->k_dim, pd = split->p_dim;
    const double off = std::max(hbar.block(0, kd, kd, pd).cwiseAbs().maxCoeff(),
                                hbar.block(kd, 0, pd, kd).cwiseAbs().maxCoeff());
    if (off > block_tol * hbar.norm())
      throw std::invalid_argument("act_basis_change: basis change not block diagonal");
  }
  const Matrix hi = lu.inverse();
  std::vector<Matrix> tmp(d), comps(d);
  for (int m = 0; m < d; ++m) tmp[m] = hi.transpose() * mu.comp(m) * hi;
  for (int k = 0; k < d; ++k) {
    comps[k] = Matrix::Zero(d, d);
    for (int m = 0; m < d; ++m) comps[k] += hbar(k, m) * tmp[m];
  }
  return BracketTensor::from_components(std::move(comps), 1e-6);
}

DerivationBasis derivation_algebra(const BracketTensor& mu,
                                   const ReductiveSplit* split,
                                   DerivationConstraint constraint,
                                   double sv_rel_tol) {
  const int d = mu.dim();
  const int unknowns = d * d;  // D_{uv}, row-major
  auto col = [d](int u, int v) { return u * d + v; };

  std::vector<Eigen::RowVectorXd> rows;
  // D mu(e_i,e_j) - mu(De_i,e_j) - mu(e_i,De_j) = 0, coordinate m:
  //   sum_a D_{ma} c^a_{ij} - sum_a D_{ai} c^m_{aj} - sum_b D_{bj} c^m_{ib} = 0
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int m = 0; m < d; ++m) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
        for (int a = 0; a < d; ++a) {
          row(col(m, a)) += mu.component(a, i, j);
          row(col(a, i)) -= mu.component(m, a, j);
          row(col(a, j)) -= mu.component(m, i, a);
        }
        rows.push_back(row);
      }

  const bool restrict_split =
      split && constraint != DerivationConstraint::Full && split->k_dim > 0;
  if (restrict_split) {
    if (split->total() != d)
      throw std::invalid_argument("derivation_algebra: split does not match dimension");
    for (int u = split->k_dim; u < d; ++u)
      for (int v = 0; v < split->k_dim; ++v) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
        row(col(u, v)) = 1.0;
        rows.push_back(row);
      }
    if (constraint == DerivationConstraint::IsotropyBlockZero) {
      for (int u = 0; u < split->k_dim; ++u)
        for (int v = 0; v < d; ++v) {
          Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
          row(col(u, v)) = 1.0;
          rows.push_back(row);
        }
    }
  }

  Matrix M(static_cast<long>(rows.size()), unknowns);
  for (size_t r = 0; r < rows.size(); ++r) M.row(static_cast<long>(r)) = rows[r];

  NullspaceSplit ns = nullspace_split(M, sv_rel_tol);
  DerivationBasis basis;
  basis.restricted = restrict_split;
  for (int c = 0; c < ns.kernel.cols(); ++c)
    basis.elements.push_back(unvec_rowmajor(ns.kernel.col(c), d, d));
  return basis;
}

double derivation_defect(const BracketTensor& mu, const Matrix& D) {
  const int d = mu.dim();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Vector lhs = D * mu.apply_basis(i, j);
      Vector rhs = mu.apply(D.col(i), Vector::Unit(d, j)) +
                   mu.apply(Vector::Unit(d, i), D.col(j));
      worst = std::max(worst, (lhs - rhs).norm());
    }
  return worst;
}

AdmissibilityReport check_admissibility(const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma,
                                        double tol) {
  const int d = mu.dim();
  if (split.total() != d)
    throw std::invalid_argument("check_admissibility: split does not match bracket");
  if (gamma.p_dim() != split.p_dim)
    throw std::invalid_argument("check_admissibility: tensor does not match split");
  const int kd = split.k_dim, pd = split.p_dim;

  AdmissibilityReport rep;
  rep.cond_ii_note =
      "closedness of the isotropy subgroup is not decidable numerically; "
      "proceeding on the caller's assertion";

  if (kd == 0) {
    rep.cond_i = rep.cond_iii = rep.cond_iv = true;
    return rep;
  }

  // (i) mu(k,k) in k, mu(k,p) in p
  double res_i = 0.0;
  for (int i = 0; i < kd; ++i) {
    for (int j = i + 1; j < kd; ++j)
      res_i = std::max(res_i, mu.apply_basis(i, j).tail(pd).norm());
    for (int j = kd; j < d; ++j)
      res_i = std::max(res_i, mu.apply_basis(i, j).head(kd).norm());
  }
  rep.res_i = res_i;
  rep.cond_i = res_i < tol;

  // (iii) the map Z -> mu(Z, .)|_p on k has trivial kernel
  Matrix K(kd, static_cast<long>(pd) * d);
  for (int z = 0; z < kd; ++z) {
    Matrix adz = mu.ad_basis(z);
    K.row(z) = vec_rowmajor(adz.block(0, kd, d, pd)).transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(K);
  const Vector& sv = svd.singularValues();
  rep.res_iii = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  rep.cond_iii = numerical_rank(K) == kd;

  // (iv) theta(ad Z|_p) gamma = 0 for a basis of k
  rep.res_iv = adK_invariance_residual(mu, split, gamma);
  rep.cond_iv = rep.res_iv < tol;
  return rep;
}

}  // namespace homflow
