#include "homflow/soliton_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace homflow {

std::string to_string(SolitonType t) {
  switch (t) {
    case SolitonType::Expanding: return "expanding";
    case SolitonType::Steady: return "steady";
    case SolitonType::Shrinking: return "shrinking";
    case SolitonType::NotASoliton: return "not_a_soliton";
  }
  return "?";
}

std::string to_string(ADynamics d) {
  switch (d) {
    case ADynamics::Trivial: return "trivial";
    case ADynamics::Periodic: return "periodic";
    case ADynamics::QuasiPeriodic: return "quasi_periodic";
  }
  return "?";
}

Matrix SolitonCertificate::D_p(const ReductiveSplit& split) const {
  return D.block(split.k_dim, split.k_dim, split.p_dim, split.p_dim);
}

namespace {

struct LstsqResult {
  double c_prime = 0.0;
  Vector coeffs;
  double residual = 0.0;
  bool c_prime_unique = true;
};

/// min over (c', x) of |Q - c' I - sum x_i M_i| in the Frobenius norm,
/// minimum-norm solution on rank deficiency.
LstsqResult solve_affine_lstsq(const Matrix& Q, const std::vector<Matrix>& Ms) {
  const int p = static_cast<int>(Q.rows());
  const int m = static_cast<int>(Ms.size());
  Matrix cols(static_cast<long>(p) * p, 1 + m);
  cols.col(0) = vec_rowmajor(Matrix::Identity(p, p));
  for (int i = 0; i < m; ++i) cols.col(1 + i) = vec_rowmajor(Ms[i]);
  Eigen::BDCSVD<Matrix> svd(cols, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  Vector b = vec_rowmajor(Q);
  Vector x = svd.solve(b);
  LstsqResult out;
  out.c_prime = x(0);
  out.coeffs = x.tail(m);
  out.residual = (cols * x - b).norm();
  if (m > 0) {
    const int full = numerical_rank(cols, 1e-9);
    const int partial = numerical_rank(cols.rightCols(m), 1e-9);
    out.c_prime_unique = full == partial + 1;
  }
  return out;
}

}  // namespace

SolitonCertificate solve_semi_algebraic(const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma,
                                        const PreferredDirection& dir,
                                        const SolitonSolveOptions& opts) {
  AdmissibilityReport adm = check_admissibility(mu, split, gamma);
  if (!adm.all_pass())
    throw std::invalid_argument("solve_semi_algebraic: inadmissible input data");

  StabilizerDecomposition dec = stabilizer_algebra(gamma, opts.sv_rel_tol);
  Tensor q = dir.evaluate(mu, split, gamma);
  Matrix Q = solve_operator_from_tensor(gamma, q, dec, 1e-5);

  DerivationBasis der = derivation_algebra(
      mu, &split,
      opts.d00 ? DerivationConstraint::IsotropyBlockZero
               : DerivationConstraint::PreserveIsotropy,
      opts.sv_rel_tol);

  std::vector<Matrix> Dp_blocks, projected;
  for (const Matrix& D : der.elements) {
    Matrix Dp = D.block(split.k_dim, split.k_dim, split.p_dim, split.p_dim);
    Dp_blocks.push_back(Dp);
    projected.push_back(project_to_complement(Dp, dec));
  }

  LstsqResult semi = solve_affine_lstsq(Q, projected);
  LstsqResult alg = solve_affine_lstsq(Q, Dp_blocks);

  const double accept = opts.threshold * (Q.norm() + 1.0);
  const bool algebraic_witness = alg.residual <= accept;
  const LstsqResult& used = algebraic_witness ? alg : semi;

  SolitonCertificate cert;
  cert.alpha = dir.alpha;
  cert.r = dir.r;
  cert.s = dir.s;
  cert.d00_form = opts.d00;
  cert.c_prime = used.c_prime;
  cert.c_prime_unique = used.c_prime_unique;
  cert.flow_constant_c = (dir.s - dir.r) * used.c_prime;
  cert.D = Matrix::Zero(mu.dim(), mu.dim());
  for (int i = 0; i < der.dim(); ++i) cert.D += used.coeffs(i) * der.elements[i];

  Matrix Dp = cert.D_p(split);
  cert.A = project_to_stabilizer(Dp, dec);
  cert.residual =
      (Q - cert.c_prime * Matrix::Identity(split.p_dim, split.p_dim) -
       project_to_complement(Dp, dec))
          .norm();
  cert.is_algebraic = cert.residual <= accept &&
                      (project_to_complement(Dp, dec) - Dp).norm() < opts.algebraic_tol;

  if (cert.residual <= accept) {
    const double zero_tol = 1e-9 * (Q.norm() + 1.0);
    if (std::abs(cert.flow_constant_c) < zero_tol)
      cert.type = SolitonType::Steady;
    else
      cert.type = cert.flow_constant_c > 0 ? SolitonType::Expanding
                                           : SolitonType::Shrinking;
  } else {
    cert.type = SolitonType::NotASoliton;
  }
  return cert;
}

AlgebraicCheck check_algebraic(const SolitonCertificate& cert,
                               const ReductiveSplit& split,
                               const StabilizerDecomposition& dec, double tol) {
  Matrix Dp = cert.D_p(split);
  AlgebraicCheck out;
  out.defect = (project_to_complement(Dp, dec) - Dp).norm();
  out.algebraic = out.defect < tol;
  return out;
}

double ScalingPair::c_of_t(double t) const {
  if (c == 0.0) return 1.0;
  const double x = (1.0 - alpha) * c * t + 1.0;
  if (x <= 0.0) throw std::domain_error("ScalingPair: t outside the maximal interval");
  return std::pow(x, 1.0 / (1.0 - alpha));
}

double ScalingPair::s_of_t(double t) const {
  if (c == 0.0) return t;
  const double x = (1.0 - alpha) * c * t + 1.0;
  if (x <= 0.0) throw std::domain_error("ScalingPair: t outside the maximal interval");
  return std::log(x) / ((1.0 - alpha) * c);
}

double ScalingPair::T_alpha() const {
  if (c == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / ((1.0 - alpha) * std::abs(c));
}

bool ScalingPair::in_domain(double t) const {
  if (c == 0.0) return true;
  return (1.0 - alpha) * c * t + 1.0 > 0.0;
}

ScalingPair scaling_pair(double flow_constant_c, double alpha) {
  if (alpha >= 1.0) throw std::invalid_argument("scaling_pair: alpha must be < 1");
  return {flow_constant_c, alpha};
}

InvariantTensor self_similar_solution(const InvariantTensor& gamma,
                                      const SolitonCertificate& cert,
                                      const ReductiveSplit& split, double t) {
  ScalingPair sp = scaling_pair(cert.flow_constant_c, cert.alpha);
  const double ct = sp.c_of_t(t);
  const double st = sp.s_of_t(t);
  InvariantTensor moved = group_action(matrix_exponential(st * cert.D_p(split)), gamma);
  return moved.scaled(ct);
}

BracketTensor closed_form_bracket_evolution(const BracketTensor& mu,
                                            const ReductiveSplit& split,
                                            const SolitonCertificate& cert, double t) {
  if (!cert.d00_form)
    throw std::invalid_argument(
        "closed_form_bracket_evolution: certificate not in diag(0, D_p) form");
  ScalingPair sp = scaling_pair(cert.flow_constant_c, cert.alpha);
  const double ct = sp.c_of_t(t);
  const double st = sp.s_of_t(t);
  const int d = mu.dim();
  Matrix conj = Matrix::Identity(d, d);
  conj.block(split.k_dim, split.k_dim, split.p_dim, split.p_dim) =
      matrix_exponential(st * cert.A);
  BracketTensor rotated = act_basis_change(conj, mu, &split);
  const double factor = std::pow(ct, 1.0 / (cert.s - cert.r));
  return scale_bracket(rotated, split, factor);
}

Matrix closed_form_coupling(const SolitonCertificate& cert,
                            const ReductiveSplit& split, double t) {
  ScalingPair sp = scaling_pair(cert.flow_constant_c, cert.alpha);
  const double ct = sp.c_of_t(t);
  const double st = sp.s_of_t(t);
  return std::pow(ct, 1.0 / (cert.r - cert.s)) * matrix_exponential(st * cert.A) *
         matrix_exponential(-st * cert.D_p(split));
}

namespace {

double scmu_ray_deviation(const Vector& ref, const Vector& state,
                          const ReductiveSplit& split, int dim) {
  // deviation of state/|state| from the scaling ray through ref
  BracketTensor mu0 = BracketTensor::from_flat_unchecked(dim, ref);
  Vector u = state / state.norm();
  auto dev_for = [&](double logc) {
    BracketTensor scaled = scale_bracket(mu0, split, std::exp(logc));
    Vector v = scaled.flatten();
    return (v / v.norm() - u).norm();
  };
  if (split.k_dim == 0) return dev_for(0.0);
  double a = -6.0, b = 6.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = dev_for(c1), f2 = dev_for(c2);
  for (int i = 0; i < 120; ++i) {
    if (f1 < f2) { b = c2; c2 = c1; f2 = f1; c1 = b - gr * (b - a); f1 = dev_for(c1); }
    else        { a = c1; c1 = c2; f1 = f2; c2 = a + gr * (b - a); f2 = dev_for(c2); }
  }
  return std::min(f1, f2);
}

}  // namespace

FixedPointReport detect_fixed_point_up_to_scaling(const FlowTrajectory& traj,
                                                  const ReductiveSplit& split,
                                                  double tol) {
  if (traj.size() < 2)
    throw std::invalid_argument("detect_fixed_point: need at least two samples");
  const int dim = split.total();
  const Vector& ref = traj.states.front();
  if (ref.norm() == 0.0)
    throw std::invalid_argument("detect_fixed_point: zero bracket in trajectory");
  Vector u0 = ref / ref.norm();

  FixedPointReport out;
  for (const Vector& y : traj.states) {
    if (y.norm() == 0.0)
      throw std::invalid_argument("detect_fixed_point: zero bracket in trajectory");
    double dev;
    if (split.k_dim == 0) {
      dev = (y / y.norm() - u0).norm();
    } else {
      dev = scmu_ray_deviation(ref, y, split, dim);
    }
    out.max_angular_deviation = std::max(out.max_angular_deviation, dev);
  }
  out.fixed = out.max_angular_deviation < tol;
  return out;
}

namespace {

/// Rational test through continued-fraction convergents p/q of x, accepting
/// when the linear form |q x - p| drops below tol before the coefficients
/// exceed max_coeff.
bool ratio_is_rational(double x, double tol, long max_coeff) {
  double xk = x;
  // convergent recurrence p_k = a_k p_{k-1} + p_{k-2}
  long pk_m1 = 1, qk_m1 = 0;
  long pk_m2 = 0, qk_m2 = 1;
  for (int it = 0; it < 64; ++it) {
    const double fl = std::floor(xk);
    if (fl > static_cast<double>(max_coeff) * 4.0) return true;  // enormous term: rational
    const long a = static_cast<long>(fl);
    const long pk = a * pk_m1 + pk_m2;
    const long qk = a * qk_m1 + qk_m2;
    if (qk > max_coeff || pk > max_coeff) return false;
    if (std::abs(qk * x - pk) < tol) return true;
    const double frac = xk - fl;
    if (frac < 1e-15) return true;  // expansion terminated
    xk = 1.0 / frac;
    pk_m2 = pk_m1; qk_m2 = qk_m1;
    pk_m1 = pk; qk_m1 = qk;
  }
  return false;
}

}  // namespace

ADynamicsReport classify_A_dynamics(const Matrix& A, double tol, long max_coeff) {
  const double scale = std::max(1.0, A.norm());
  if (antisymmetry_defect(A) > 1e-8 * scale)
    throw std::invalid_argument("classify_A_dynamics: matrix not antisymmetric");
  ADynamicsReport rep;
  Eigen::EigenSolver<Matrix> es(0.5 * (A - A.transpose()));
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double im = es.eigenvalues()(i).imag();
    if (im > 1e-10 * scale) rep.frequencies.push_back(im);
  }
  std::sort(rep.frequencies.begin(), rep.frequencies.end());
  if (rep.frequencies.empty()) {
    rep.verdict = ADynamics::Trivial;
    return rep;
  }
  const double base = rep.frequencies.front();
  bool all_rational = true;
  for (size_t i = 1; i < rep.frequencies.size(); ++i)
    if (!ratio_is_rational(rep.frequencies[i] / base, tol, max_coeff)) {
      all_rational = false;
      break;
    }
  rep.verdict = all_rational ? ADynamics::Periodic : ADynamics::QuasiPeriodic;
  return rep;
}

FlowDiagonalReport flow_diagonal_test(const BracketTensor& mu,
                                      const ReductiveSplit& split,
                                      const InvariantTensor& gamma,
                                      const PreferredDirection& dir, double t0,
                                      double t1, const IntegratorConfig& cfg,
                                      const SolitonCertificate* cert) {
  StabilizerDecomposition dec0 = stabilizer_algebra(gamma);
  Tensor q0 = dir.evaluate(mu, split, gamma);
  Matrix Q0 = solve_operator_from_tensor(gamma, q0, dec0, 1e-5);
  if ((Q0 - Q0.transpose()).norm() > 1e-8 * (1.0 + Q0.norm()))
    throw std::invalid_argument("flow_diagonal_test: Q_gamma not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Q0 + Q0.transpose()));
  const Matrix V = es.eigenvectors();

  FlowTrajectory traj = integrate_geometric_flow(gamma, mu, split, dir, t0, t1, cfg);

  FlowDiagonalReport rep;
  const size_t stride = std::max<size_t>(1, traj.size() / 200);
  for (size_t i = 0; i < traj.size(); i += stride) {
    InvariantTensor gt = gamma.with_flat(traj.states[i]);
    StabilizerDecomposition dect = stabilizer_algebra(gt);
    Tensor qt = dir.evaluate(mu, split, gt);
    Matrix Qt = solve_operator_from_tensor(gt, qt, dect, 1e-4);
    Matrix M = V.transpose() * Qt * V;
    double off = 0.0;
    for (int a = 0; a < M.rows(); ++a)
      for (int b = 0; b < M.cols(); ++b)
        if (a != b) off = std::max(off, std::abs(M(a, b)));
    rep.max_offdiag = std::max(rep.max_offdiag, off);

    if (cert) {
      ScalingPair sp = scaling_pair(cert->flow_constant_c, cert->alpha);
      const double t = traj.times[i];
      if (sp.in_domain(t)) {
        Matrix E = matrix_exponential(sp.s_of_t(t) * cert->D_p(split));
        Matrix Qcf = std::pow(sp.c_of_t(t), cert->alpha - 1.0) * E * Q0 * E.inverse();
        rep.closed_form_residual =
            std::max(rep.closed_form_residual, (Qt - Qcf).norm());
      }
    }
  }
  rep.flow_diagonal = rep.max_offdiag < 1e-7;
  return rep;
}

std::string certificate_record(const SolitonCertificate& cert) {
  std::ostringstream os;
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  os << "c_prime: "; put(cert.c_prime); os << "\n";
  os << "flow_constant_c: "; put(cert.flow_constant_c); os << "\n";
  os << "soliton_type: " << to_string(cert.type) << "\n";
  os << "residual: "; put(cert.residual); os << "\n";
  os << "is_algebraic: " << (cert.is_algebraic ? "true" : "false") << "\n";
  os << "D:";
  for (int i = 0; i < cert.D.rows(); ++i)
    for (int j = 0; j < cert.D.cols(); ++j) { os << ' '; put(cert.D(i, j)); }
  os << "\nA:";
  for (int i = 0; i < cert.A.rows(); ++i)
    for (int j = 0; j < cert.A.cols(); ++j) { os << ' '; put(cert.A(i, j)); }
  os << "\n";
  return os.str();
}

}  // namespace homflow
