#include "homflow/curvature.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace homflow {

namespace {

void require_trivial_isotropy_metric(const BracketTensor& mu, const InvariantTensor& g) {
  if (g.kind() != TensorKind::Metric)
    throw std::invalid_argument("curvature: positive-definite metric required");
  if (g.p_dim() != mu.dim())
    throw std::invalid_argument("curvature: nontrivial isotropy not supported");
}

/// Cholesky-orthonormalized copy of the bracket: columns of L^{-t} form a
/// g-orthonormal basis, so the returned bracket holds the constants
/// c_{ijk} = <mu(f_i, f_j), f_k> of that basis.
BracketTensor orthonormalized(const BracketTensor& mu, const Matrix& G, Matrix* L_out) {
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("curvature: metric not positive definite");
  Matrix L = llt.matrixL();
  if (L_out) *L_out = L;
  return act_basis_change(L.transpose(), mu);
}

RicciTerms structure_terms_onb(const BracketTensor& onb) {
  const int n = onb.dim();
  auto c = [&](int i, int j, int k) { return onb.component(k, i, j); };

  Matrix m = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      double t1 = 0.0, t2 = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          t1 += c(a, i, j) * c(b, i, j);
          t2 += c(i, j, a) * c(i, j, b);
        }
      m(a, b) = -0.5 * t1 + 0.25 * t2;
      m(b, a) = m(a, b);
    }

  Matrix B = killing_form(onb);

  Vector H(n);
  for (int a = 0; a < n; ++a) H(a) = onb.ad_basis(a).trace();
  Matrix adH = onb.ad(H);
  Matrix S = 0.5 * (adH + adH.transpose());

  return {m, B, S};
}

}  // namespace

RicciTerms ricci_structure_terms(const BracketTensor& mu, const InvariantTensor& g) {
  require_trivial_isotropy_metric(mu, g);
  return structure_terms_onb(orthonormalized(mu, g.single().as_matrix_cov2(), nullptr));
}

CurvatureReport ricci_leftinvariant(const BracketTensor& mu, const InvariantTensor& g) {
  require_trivial_isotropy_metric(mu, g);
  const Matrix G = g.single().as_matrix_cov2();
  Matrix L;
  BracketTensor onb = orthonormalized(mu, G, &L);
  RicciTerms terms = structure_terms_onb(onb);
  Matrix ric_onb = terms.moment - 0.5 * terms.killing - terms.mean_curvature;

  CurvatureReport rep;
  rep.ricci_tensor = L * ric_onb * L.transpose();
  rep.ricci_operator = L.transpose().triangularView<Eigen::Upper>().solve(
      Matrix(L.triangularView<Eigen::Lower>().solve(rep.ricci_tensor)));
  rep.scalar_curvature = ric_onb.trace();
  return rep;
}

CurvatureReport koszul_oracle(const BracketTensor& mu, const InvariantTensor& g) {
  require_trivial_isotropy_metric(mu, g);
  const int n = mu.dim();
  const Matrix G = g.single().as_matrix_cov2();
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("koszul_oracle: metric not positive definite");

  // 2 g(nabla_{e_i} e_j, .) = g(mu(e_i,e_j), .) - g(mu(e_j, .), e_i) + g(mu(., e_i), e_j)
  std::vector<std::vector<Vector>> Gamma(n, std::vector<Vector>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vector rhs(n);
      for (int l = 0; l < n; ++l) {
        const double a = (G * mu.apply_basis(i, j))(l);
        const double b = (G * mu.apply_basis(j, l))(i);
        const double c = (G * mu.apply_basis(l, i))(j);
        rhs(l) = 0.5 * (a - b + c);
      }
      Gamma[i][j] = llt.solve(rhs);
    }

  auto nabla = [&](int i, const Vector& v) {
    Vector out = Vector::Zero(n);
    for (int m = 0; m < n; ++m) out += v(m) * Gamma[i][m];
    return out;
  };

  // R(e_i, e_j) e_k = nabla_i nabla_j e_k - nabla_j nabla_i e_k - nabla_{mu(e_i,e_j)} e_k
  auto riemann = [&](int i, int j, int k) {
    Vector a = nabla(i, Gamma[j][k]) - nabla(j, Gamma[i][k]);
    Vector w = mu.apply_basis(i, j);
    for (int m = 0; m < n; ++m) a -= w(m) * Gamma[m][k];
    return a;
  };

  CurvatureReport rep;
  rep.ricci_tensor = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      double tr = 0.0;
      for (int l = 0; l < n; ++l) tr += riemann(l, a, b)(l);
      rep.ricci_tensor(a, b) = tr;
      rep.ricci_tensor(b, a) = tr;
    }
  rep.ricci_operator = llt.solve(rep.ricci_tensor);
  rep.scalar_curvature = rep.ricci_operator.trace();
  return rep;
}

PreferredDirection ricci_flow_direction() {
  PreferredDirection dir;
  dir.name = "ricci";
  dir.alpha = 0.0;
  dir.r = 2;
  dir.s = 0;
  dir.evaluate = [](const BracketTensor& mu, const ReductiveSplit& split,
                    const InvariantTensor& g) {
    if (split.k_dim != 0)
      throw std::invalid_argument("ricci direction: trivial isotropy required");
    CurvatureReport rep = ricci_leftinvariant(mu, g);
    return Tensor::from_matrix_cov2(-2.0 * rep.ricci_tensor);
  };
  return dir;
}

PreferredDirection zero_direction(double alpha, int r, int s) {
  PreferredDirection dir;
  dir.name = "custom";
  dir.alpha = alpha;
  dir.r = r;
  dir.s = s;
  dir.evaluate = [r, s](const BracketTensor&, const ReductiveSplit&,
                        const InvariantTensor& gamma) {
    return Tensor::zeros(gamma.p_dim(), r, s);
  };
  return dir;
}

}  // namespace homflow
