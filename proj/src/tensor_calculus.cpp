#include "homflow/tensor_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace homflow {

namespace {

long ipow(int base, int exp) {
  long v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

std::vector<long> strides(int p, int naxes) {
  std::vector<long> st(naxes);
  if (naxes == 0) return st;
  st[naxes - 1] = 1;
  for (int a = naxes - 2; a >= 0; --a) st[a] = st[a + 1] * p;
  return st;
}

int permutation_sign(const std::vector<int>& perm) {
  int inv = 0;
  for (size_t a = 0; a < perm.size(); ++a)
    for (size_t b = a + 1; b < perm.size(); ++b)
      if (perm[a] > perm[b]) ++inv;
  return inv % 2 ? -1 : 1;
}

}  // namespace

Tensor Tensor::zeros(int p_dim, int r, int s) {
  Tensor t;
  t.p_dim = p_dim;
  t.r = r;
  t.s = s;
  t.data = Vector::Zero(ipow(p_dim, r + s));
  return t;
}

Tensor Tensor::from_matrix_cov2(const Matrix& G) {
  Tensor t = zeros(static_cast<int>(G.rows()), 2, 0);
  t.data = vec_rowmajor(G);
  return t;
}

Tensor Tensor::from_operator(const Matrix& J) {
  // (1,1): data[i, a] = J_{a i}
  Tensor t = zeros(static_cast<int>(J.rows()), 1, 1);
  t.data = vec_rowmajor(J.transpose());
  return t;
}

Matrix Tensor::as_matrix_cov2() const {
  if (r != 2 || s != 0) throw std::logic_error("Tensor: not a (2,0) tensor");
  return unvec_rowmajor(data, p_dim, p_dim);
}

Matrix Tensor::as_operator() const {
  if (r != 1 || s != 1) throw std::logic_error("Tensor: not a (1,1) tensor");
  return unvec_rowmajor(data, p_dim, p_dim).transpose();
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out.data += b.data;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out.data -= b.data;
  return out;
}

Tensor operator*(double c, const Tensor& t) {
  Tensor out = t;
  out.data *= c;
  return out;
}

Tensor mode_apply(const Matrix& M, const Tensor& t, int axis) {
  const int p = t.p_dim;
  const auto st = strides(p, t.axes());
  Tensor out = Tensor::zeros(p, t.r, t.s);
  const long total = t.size();
  const long stride = st[axis];
  for (long idx = 0; idx < total; ++idx) {
    const int ia = static_cast<int>((idx / stride) % p);
    const long base = idx - static_cast<long>(ia) * stride;
    double sum = 0.0;
    for (int m = 0; m < p; ++m) sum += M(ia, m) * t.data(base + m * stride);
    out.data(idx) = sum;
  }
  return out;
}

Tensor theta_action(const Matrix& A, const Tensor& t) {
  Tensor out = Tensor::zeros(t.p_dim, t.r, t.s);
  const Matrix At = A.transpose();
  for (int axis = t.r; axis < t.axes(); ++axis) out = out + mode_apply(A, t, axis);
  for (int axis = 0; axis < t.r; ++axis) out = out - mode_apply(At, t, axis);
  return out;
}

Tensor group_action(const Matrix& h, const Tensor& t) {
  Eigen::FullPivLU<Matrix> lu(h);
  if (!lu.isInvertible()) throw std::invalid_argument("group_action: singular matrix");
  const Matrix hit = lu.inverse().transpose();
  Tensor out = t;
  for (int axis = t.r; axis < t.axes(); ++axis) out = mode_apply(h, out, axis);
  for (int axis = 0; axis < t.r; ++axis) out = mode_apply(hit, out, axis);
  return out;
}

Tensor antisymmetrize(const Tensor& t) {
  if (t.s != 0) throw std::logic_error("antisymmetrize: expects a (k,0) tensor");
  const int k = t.r, p = t.p_dim;
  const auto st = strides(p, k);
  Tensor out = Tensor::zeros(p, k, 0);
  std::vector<int> idx(k), perm(k);
  const long total = t.size();
  double kfact = 1.0;
  for (int i = 2; i <= k; ++i) kfact *= i;
  for (long flat = 0; flat < total; ++flat) {
    for (int a = 0; a < k; ++a) idx[a] = static_cast<int>((flat / st[a]) % p);
    std::iota(perm.begin(), perm.end(), 0);
    double acc = 0.0;
    do {
      long src = 0;
      for (int a = 0; a < k; ++a) src += static_cast<long>(idx[perm[a]]) * st[a];
      acc += permutation_sign(perm) * t.data(src);
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.data(flat) = acc / kfact;
  }
  return out;
}

double antisymmetry_defect(const Tensor& t) {
  return (t - antisymmetrize(t)).norm();
}

std::string to_string(TensorKind k) {
  switch (k) {
    case TensorKind::Metric: return "metric";
    case TensorKind::PseudoMetric: return "pseudo_metric";
    case TensorKind::Symplectic: return "symplectic";
    case TensorKind::HermitianTriple: return "hermitian_triple";
    case TensorKind::ThreeForm: return "three_form";
    case TensorKind::Form: return "form";
  }
  return "?";
}

namespace {

void require_symmetric(const Matrix& G, double tol, const char* what) {
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + G.norm()))
    throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
}

/// Bilinear form induced by a 3-form on R^7:
/// B(x,y) vol = (i_x phi) ^ (i_y phi) ^ phi, up to a positive factor.
Matrix g2_induced_form(const Tensor& phi) {
  const int p = 7;
  auto val = [&](int i, int j, int k) {
    return phi.data(static_cast<long>(i) * 49 + j * 7 + k);
  };
  Matrix B = Matrix::Zero(p, p);
  std::vector<int> all(p);
  std::iota(all.begin(), all.end(), 0);
  // Sum over ordered partitions {a<b}, {c<d}, {e<f<g} of {0..6} with the
  // sign of the permutation (a,b,c,d,e,f,g).
  for (int x = 0; x < p; ++x)
    for (int y = x; y < p; ++y) {
      double acc = 0.0;
      for (int a = 0; a < p; ++a)
        for (int b = a + 1; b < p; ++b)
          for (int c = 0; c < p; ++c) {
            if (c == a || c == b) continue;
            for (int d = c + 1; d < p; ++d) {
              if (d == a || d == b) continue;
              std::vector<int> rest;
              for (int m = 0; m < p; ++m)
                if (m != a && m != b && m != c && m != d) rest.push_back(m);
              std::vector<int> perm = {a, b, c, d, rest[0], rest[1], rest[2]};
              const int sgn = permutation_sign(perm);
              acc += sgn * val(x, a, b) * val(y, c, d) * val(rest[0], rest[1], rest[2]);
            }
          }
      B(x, y) = acc;
      B(y, x) = acc;
    }
  return B;
}

}  // namespace

InvariantTensor InvariantTensor::metric(const Matrix& G, double tol) {
  require_symmetric(G, tol, "metric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("metric: not positive definite");
  InvariantTensor t;
  t.kind_ = TensorKind::Metric;
  t.p_dim_ = static_cast<int>(G.rows());
  t.slots_ = {Tensor::from_matrix_cov2(0.5 * (G + G.transpose()))};
  return t;
}

InvariantTensor InvariantTensor::pseudo_metric(const Matrix& G, int sig_p, int sig_q,
                                               double tol) {
  require_symmetric(G, tol, "pseudo_metric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()));
  int np = 0, nq = 0;
  const double cut = tol * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > cut) ++np;
    else if (es.eigenvalues()(i) < -cut) ++nq;
    else throw std::invalid_argument("pseudo_metric: degenerate form");
  }
  if (np != sig_p || nq != sig_q)
    throw std::invalid_argument("pseudo_metric: signature mismatch");
  InvariantTensor t;
  t.kind_ = TensorKind::PseudoMetric;
  t.p_dim_ = static_cast<int>(G.rows());
  t.sig_p_ = sig_p;
  t.sig_q_ = sig_q;
  t.slots_ = {Tensor::from_matrix_cov2(0.5 * (G + G.transpose()))};
  return t;
}

InvariantTensor InvariantTensor::symplectic(const Matrix& W, double tol) {
  if ((W + W.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + W.norm()))
    throw std::invalid_argument("symplectic: matrix not antisymmetric");
  Eigen::FullPivLU<Matrix> lu(W);
  if (!lu.isInvertible()) throw std::invalid_argument("symplectic: degenerate form");
  InvariantTensor t;
  t.kind_ = TensorKind::Symplectic;
  t.p_dim_ = static_cast<int>(W.rows());
  t.slots_ = {Tensor::from_matrix_cov2(0.5 * (W - W.transpose()))};
  return t;
}

InvariantTensor InvariantTensor::hermitian_triple(const Matrix& W, const Matrix& G,
                                                  const Matrix& J, double tol) {
  const int n = static_cast<int>(G.rows());
  InvariantTensor gpart = metric(G, tol);
  if ((J * J + Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > tol * (1.0 + J.squaredNorm()))
    throw std::invalid_argument("hermitian_triple: J^2 != -I");
  // omega = g(J., .):  omega_{ij} = (J^t G)_{ij}
  if ((W - J.transpose() * G).cwiseAbs().maxCoeff() > tol * (1.0 + W.norm()))
    throw std::invalid_argument("hermitian_triple: omega != g(J.,.)");
  InvariantTensor t;
  t.kind_ = TensorKind::HermitianTriple;
  t.p_dim_ = n;
  t.slots_ = {Tensor::from_matrix_cov2(W), Tensor::from_matrix_cov2(G),
              Tensor::from_operator(J)};
  return t;
}

InvariantTensor InvariantTensor::three_form(const Tensor& phi, double tol) {
  if (phi.r != 3 || phi.s != 0)
    throw std::invalid_argument("three_form: expects a (3,0) tensor");
  if (antisymmetry_defect(phi) > tol * (1.0 + phi.norm()))
    throw std::invalid_argument("three_form: not antisymmetric");
  if (phi.p_dim == 7) {
    Matrix B = g2_induced_form(phi);
    Eigen::SelfAdjointEigenSolver<Matrix> es(B);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (lo * hi <= 0.0 || std::min(std::abs(lo), std::abs(hi)) <
                              1e-9 * std::max(std::abs(lo), std::abs(hi)))
      throw std::invalid_argument("three_form: induced bilinear form not definite");
  }
  InvariantTensor t;
  t.kind_ = TensorKind::ThreeForm;
  t.p_dim_ = phi.p_dim;
  t.slots_ = {antisymmetrize(phi)};
  return t;
}

InvariantTensor InvariantTensor::form(const Tensor& f, double tol) {
  if (f.s != 0) throw std::invalid_argument("form: expects a (k,0) tensor");
  if (antisymmetry_defect(f) > tol * (1.0 + f.norm()))
    throw std::invalid_argument("form: not antisymmetric");
  InvariantTensor t;
  t.kind_ = TensorKind::Form;
  t.p_dim_ = f.p_dim;
  t.slots_ = {antisymmetrize(f)};
  return t;
}

InvariantTensor InvariantTensor::euclidean(int n) {
  return metric(Matrix::Identity(n, n));
}

InvariantTensor InvariantTensor::standard_symplectic(int n2) {
  if (n2 % 2) throw std::invalid_argument("standard_symplectic: odd dimension");
  Matrix W = Matrix::Zero(n2, n2);
  for (int i = 0; i < n2 / 2; ++i) {
    W(2 * i, 2 * i + 1) = 1.0;
    W(2 * i + 1, 2 * i) = -1.0;
  }
  return symplectic(W);
}

InvariantTensor InvariantTensor::standard_hermitian(int n2) {
  if (n2 % 2) throw std::invalid_argument("standard_hermitian: odd dimension");
  Matrix J = Matrix::Zero(n2, n2);
  for (int i = 0; i < n2 / 2; ++i) {
    J(2 * i + 1, 2 * i) = 1.0;
    J(2 * i, 2 * i + 1) = -1.0;
  }
  Matrix G = Matrix::Identity(n2, n2);
  return hermitian_triple(J.transpose() * G, G, J);
}

InvariantTensor InvariantTensor::standard_g2() {
  Tensor phi = Tensor::zeros(7, 3, 0);
  struct Term { int i, j, k; double c; };
  const Term terms[] = {{1, 2, 3, 1}, {1, 4, 5, 1}, {1, 6, 7, 1}, {2, 4, 6, 1},
                        {2, 5, 7, -1}, {3, 4, 7, -1}, {3, 5, 6, -1}};
  auto set = [&](int i, int j, int k, double v) {
    phi.data(static_cast<long>(i) * 49 + j * 7 + k) = v;
  };
  for (const Term& t : terms) {
    const int i = t.i - 1, j = t.j - 1, k = t.k - 1;
    set(i, j, k, t.c); set(j, k, i, t.c); set(k, i, j, t.c);
    set(j, i, k, -t.c); set(i, k, j, -t.c); set(k, j, i, -t.c);
  }
  return three_form(phi);
}

const Tensor& InvariantTensor::single() const {
  if (slots_.size() != 1)
    throw std::logic_error("InvariantTensor: kind holds several components");
  return slots_[0];
}

Vector InvariantTensor::flatten() const {
  long total = 0;
  for (const Tensor& t : slots_) total += t.size();
  Vector flat(total);
  long off = 0;
  for (const Tensor& t : slots_) {
    flat.segment(off, t.size()) = t.data;
    off += t.size();
  }
  return flat;
}

InvariantTensor InvariantTensor::with_flat(const Vector& flat) const {
  InvariantTensor out = *this;
  long off = 0;
  for (Tensor& t : out.slots_) {
    t.data = flat.segment(off, t.size());
    off += t.size();
  }
  if (off != flat.size())
    throw std::invalid_argument("InvariantTensor: flat size mismatch");
  return out;
}

InvariantTensor InvariantTensor::scaled(double c) const {
  if (multi_slot())
    throw std::logic_error("InvariantTensor: scaling a tensor tuple is not defined");
  InvariantTensor out = *this;
  out.slots_[0].data *= c;
  return out;
}

double InvariantTensor::norm() const { return flatten().norm(); }

std::vector<Tensor> theta_action(const Matrix& A, const InvariantTensor& gamma) {
  std::vector<Tensor> out;
  out.reserve(gamma.slots().size());
  for (const Tensor& t : gamma.slots()) out.push_back(theta_action(A, t));
  return out;
}

InvariantTensor group_action(const Matrix& h, const InvariantTensor& gamma) {
  std::vector<Tensor> moved;
  for (const Tensor& t : gamma.slots()) moved.push_back(group_action(h, t));
  Vector flat(gamma.flatten().size());
  long off = 0;
  for (const Tensor& t : moved) {
    flat.segment(off, t.size()) = t.data;
    off += t.size();
  }
  return gamma.with_flat(flat);
}

double tuple_norm(const std::vector<Tensor>& ts) {
  double s = 0.0;
  for (const Tensor& t : ts) s += t.data.squaredNorm();
  return std::sqrt(s);
}

StabilizerDecomposition stabilizer_algebra(const InvariantTensor& gamma,
                                           double sv_rel_tol) {
  const int p = gamma.p_dim();
  long rows = 0;
  for (const Tensor& t : gamma.slots()) rows += t.size();
  Matrix Theta(rows, static_cast<long>(p) * p);
  for (int u = 0; u < p; ++u)
    for (int v = 0; v < p; ++v) {
      Matrix E = Matrix::Zero(p, p);
      E(u, v) = 1.0;
      long off = 0;
      for (const Tensor& t : gamma.slots()) {
        Tensor th = theta_action(E, t);
        Theta.block(off, static_cast<long>(u) * p + v, th.size(), 1) = th.data;
        off += th.size();
      }
    }
  NullspaceSplit ns = nullspace_split(Theta, sv_rel_tol);
  StabilizerDecomposition dec;
  dec.p_dim = p;
  dec.complement_invariant = gamma.kind() != TensorKind::PseudoMetric;
  for (int c = 0; c < ns.kernel.cols(); ++c)
    dec.stab_basis.push_back(unvec_rowmajor(ns.kernel.col(c), p, p));
  for (int c = 0; c < ns.range.cols(); ++c)
    dec.comp_basis.push_back(unvec_rowmajor(ns.range.col(c), p, p));
  return dec;
}

Matrix project_to_complement(const Matrix& A, const StabilizerDecomposition& dec) {
  Matrix out = Matrix::Zero(dec.p_dim, dec.p_dim);
  for (const Matrix& C : dec.comp_basis) out += A.cwiseProduct(C).sum() * C;
  return out;
}

Matrix project_to_stabilizer(const Matrix& A, const StabilizerDecomposition& dec) {
  Matrix out = Matrix::Zero(dec.p_dim, dec.p_dim);
  for (const Matrix& S : dec.stab_basis) out += A.cwiseProduct(S).sum() * S;
  return out;
}

OperatorSolver::OperatorSolver(const InvariantTensor& gamma,
                               const StabilizerDecomposition& dec)
    : dec_(dec) {
  long rows = 0;
  for (const Tensor& t : gamma.slots()) rows += t.size();
  columns_ = Matrix(rows, dec.comp_dim());
  for (int c = 0; c < dec.comp_dim(); ++c) {
    long off = 0;
    for (const Tensor& t : gamma.slots()) {
      Tensor th = theta_action(dec.comp_basis[c], t);
      columns_.block(off, c, th.size(), 1) = th.data;
      off += th.size();
    }
  }
  qr_.compute(columns_);
}

Matrix OperatorSolver::solve(const std::vector<Tensor>& q, double tol,
                             double* residual_out) const {
  long rows = 0;
  for (const Tensor& t : q) rows += t.size();
  if (rows != columns_.rows())
    throw std::invalid_argument("OperatorSolver: direction shape mismatch");
  Vector b(rows);
  long off = 0;
  for (const Tensor& t : q) {
    b.segment(off, t.size()) = t.data;
    off += t.size();
  }
  Vector x = qr_.solve(b);
  const double residual = (columns_ * x - b).norm();
  if (residual_out) *residual_out = residual;
  if (residual > tol * (1.0 + b.norm()))
    throw std::runtime_error(
        "solve_operator_from_tensor: direction outside theta(gl(p)) orbit tangent "
        "(type-incompatible direction)");
  Matrix Q = Matrix::Zero(dec_.p_dim, dec_.p_dim);
  for (int c = 0; c < dec_.comp_dim(); ++c) Q += x(c) * dec_.comp_basis[c];
  return Q;
}

Matrix OperatorSolver::solve(const Tensor& q, double tol, double* residual_out) const {
  return solve(std::vector<Tensor>{q}, tol, residual_out);
}

Matrix solve_operator_from_tensor(const InvariantTensor& gamma, const Tensor& q,
                                  const StabilizerDecomposition& dec, double tol,
                                  double* residual_out) {
  return OperatorSolver(gamma, dec).solve(q, tol, residual_out);
}

double adK_invariance_residual(const BracketTensor& mu, const ReductiveSplit& split,
                               const InvariantTensor& gamma) {
  if (split.total() != mu.dim())
    throw std::invalid_argument("adK_invariance_residual: split mismatch");
  double worst = 0.0;
  for (int z = 0; z < split.k_dim; ++z)
    worst = std::max(worst, tuple_norm(theta_action(mu.ad_p(z, split), gamma)));
  return worst;
}

Tensor exterior_differential(const BracketTensor& mu, const ReductiveSplit& split,
                             const Tensor& form, double antisym_tol) {
  if (form.s != 0)
    throw std::invalid_argument("exterior_differential: expects a (k,0) form");
  if (form.p_dim != split.p_dim)
    throw std::invalid_argument("exterior_differential: form does not match split");
  if (antisymmetry_defect(form) > antisym_tol * (1.0 + form.norm()))
    throw std::invalid_argument("exterior_differential: form not antisymmetric");
  const int k = form.r, p = form.p_dim, kd = split.k_dim;
  Tensor out = Tensor::zeros(p, k + 1, 0);
  if (k + 1 > p) return out;

  const auto st_in = strides(p, k);
  const auto st_out = strides(p, k + 1);

  // increasing tuples I of length k+1 over p-relative indices
  std::vector<int> I(k + 1);
  std::iota(I.begin(), I.end(), 0);
  auto advance = [&]() {
    int pos = k;
    while (pos >= 0 && I[pos] == p - (k + 1 - pos)) --pos;
    if (pos < 0) return false;
    ++I[pos];
    for (int q = pos + 1; q <= k; ++q) I[q] = I[q - 1] + 1;
    return true;
  };

  std::vector<int> perm(k + 1);
  do {
    double val = 0.0;
    for (int a = 0; a <= k; ++a)
      for (int b = a + 1; b <= k; ++b) {
        const int sgn = ((a + 1) + (b + 1)) % 2 ? -1 : 1;
        Vector w = mu.apply_basis(kd + I[a], kd + I[b]);
        std::vector<int> rest;
        for (int q = 0; q <= k; ++q)
          if (q != a && q != b) rest.push_back(I[q]);
        // contract the p-projection of w into the first slot of the form
        long base = 0;
        for (int q = 0; q < k - 1; ++q) base += static_cast<long>(rest[q]) * st_in[q + 1];
        double term = 0.0;
        for (int m = 0; m < p; ++m) term += w(kd + m) * form.data(base + static_cast<long>(m) * st_in[0]);
        val += sgn * term;
      }
    if (val != 0.0) {
      std::iota(perm.begin(), perm.end(), 0);
      do {
        long dst = 0;
        for (int q = 0; q <= k; ++q) dst += static_cast<long>(I[perm[q]]) * st_out[q];
        out.data(dst) = permutation_sign(perm) * val;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  } while (advance());
  return out;
}

bool is_in_normalizer(const Matrix& h, const BracketTensor& mu,
                      const ReductiveSplit& split, double tol) {
  if (split.k_dim == 0) {
    Eigen::FullPivLU<Matrix> lu(h);
    if (!lu.isInvertible())
      throw std::invalid_argument("is_in_normalizer: singular matrix");
    return true;
  }
  Eigen::FullPivLU<Matrix> lu(h);
  if (!lu.isInvertible())
    throw std::invalid_argument("is_in_normalizer: singular matrix");
  const Matrix hi = lu.inverse();
  const int pd = split.p_dim;
  Matrix span(static_cast<long>(pd) * pd, split.k_dim);
  for (int z = 0; z < split.k_dim; ++z) span.col(z) = vec_rowmajor(mu.ad_p(z, split));
  NullspaceSplit ns = nullspace_split(span.transpose());
  const Matrix& R = ns.range;  // orthonormal basis of the span
  for (int z = 0; z < split.k_dim; ++z) {
    Vector w = vec_rowmajor(h * mu.ad_p(z, split) * hi);
    const double defect = (w - R * (R.transpose() * w)).norm();
    if (defect > tol * (1.0 + w.norm())) return false;
  }
  return true;
}

}  // namespace homflow
