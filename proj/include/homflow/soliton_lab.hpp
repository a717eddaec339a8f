#pragma once

#include <string>
#include <vector>

#include "homflow/curvature.hpp"
#include "homflow/flow_engine.hpp"
#include "homflow/lie_structures.hpp"
#include "homflow/tensor_calculus.hpp"

namespace homflow {

enum class SolitonType { Expanding, Steady, Shrinking, NotASoliton };

std::string to_string(SolitonType t);

/// Witness for the soliton operator equation Q = c' I + proj_gamma(D_p)
/// with D a derivation preserving the isotropy subalgebra.  flow_constant_c
/// is the constant of the tensor equation q = c gamma + theta(D_p) gamma,
/// c = (s - r) c'.
struct SolitonCertificate {
  double c_prime = 0.0;
  double flow_constant_c = 0.0;
  Matrix D;  // (k+n) x (k+n) derivation
  Matrix A;  // stabilizer component of D_p
  double residual = 0.0;
  bool is_algebraic = false;
  SolitonType type = SolitonType::NotASoliton;
  bool c_prime_unique = true;
  bool d00_form = false;  // D = diag(0, D_p)

  // degree data of the direction, carried for the closed-form evolutions
  double alpha = 0.0;
  int r = 2, s = 0;

  Matrix D_p(const ReductiveSplit& split) const;
};

struct SolitonSolveOptions {
  bool d00 = true;  // restrict the derivation search to the diag(0, D_p) block form
  double threshold = 1e-8;  // acceptance residual, relative to |Q| + 1
  double algebraic_tol = 1e-8;
  double sv_rel_tol = 1e-9;
};

/// Least-squares solve of Q = c' I + proj_gamma(D_p) over the derivation
/// algebra; a residual below the threshold certifies a semi-algebraic
/// soliton.  When an exact-derivation witness exists (no projection
/// needed) it is preferred and the certificate is algebraic.  A large
/// residual is a valid negative answer, reported as NotASoliton.
SolitonCertificate solve_semi_algebraic(const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma,
                                        const PreferredDirection& dir,
                                        const SolitonSolveOptions& opts = {});

struct AlgebraicCheck {
  bool algebraic = false;
  double defect = 0.0;  // |proj_gamma(D_p) - D_p|
};
AlgebraicCheck check_algebraic(const SolitonCertificate& cert,
                               const ReductiveSplit& split,
                               const StabilizerDecomposition& dec,
                               double tol = 1e-8);

/// The scaling pair of a self-similar solution:
/// c(t) = ((1-alpha) c t + 1)^{1/(1-alpha)},
/// s(t) = log((1-alpha) c t + 1) / ((1-alpha) c), with s(t) = t when c = 0.
/// The maximal domain is (-T, inf), (-inf, inf) or (-inf, T) by soliton type,
/// T = 1/((1-alpha)|c|).
struct ScalingPair {
  double c = 0.0;
  double alpha = 0.0;

  double c_of_t(double t) const;
  double s_of_t(double t) const;
  double T_alpha() const;  // +inf for steady
  bool in_domain(double t) const;
};

ScalingPair scaling_pair(double flow_constant_c, double alpha);

/// gamma(t) = c(t) e^{s(t) D_p} . gamma; matches the integrated flow on
/// certified solitons.
InvariantTensor self_similar_solution(const InvariantTensor& gamma,
                                      const SolitonCertificate& cert,
                                      const ReductiveSplit& split, double t);

/// mu(t) = c(t)^{1/(s-r)} . (diag(I, e^{s(t) A}) . mu), the bracket-flow
/// image of a certified soliton in diag(0, D_p) form.
BracketTensor closed_form_bracket_evolution(const BracketTensor& mu,
                                            const ReductiveSplit& split,
                                            const SolitonCertificate& cert, double t);

/// Closed-form coupling h(t) = c(t)^{1/(r-s)} e^{s(t)A} e^{-s(t)D_p}.
Matrix closed_form_coupling(const SolitonCertificate& cert,
                            const ReductiveSplit& split, double t);

struct FixedPointReport {
  bool fixed = false;
  double max_angular_deviation = 0.0;
};

/// True when mu(t)/|mu(t)| stays on the ray of mu(0); with nontrivial
/// isotropy the deviation is measured after an optimal fit of the scaling
/// action c.mu.
FixedPointReport detect_fixed_point_up_to_scaling(const FlowTrajectory& traj,
                                                  const ReductiveSplit& split,
                                                  double tol = 1e-6);

enum class ADynamics { Trivial, Periodic, QuasiPeriodic };

std::string to_string(ADynamics d);

struct ADynamicsReport {
  ADynamics verdict = ADynamics::Trivial;
  std::vector<double> frequencies;  // positive imaginary parts of eig(A)
};

/// Dichotomy for e^{sA} with A antisymmetric: trivial when A has no
/// rotation part; periodic when all frequency ratios are rational (tested
/// through continued-fraction convergents with numerator/denominator up to
/// max_coeff, accepting when the linear form |q a_j - p a_1| is below tol);
/// quasi-periodic otherwise (orbit closure a torus).
ADynamicsReport classify_A_dynamics(const Matrix& A, double tol = 1e-9,
                                    long max_coeff = 1000000);

struct FlowDiagonalReport {
  bool flow_diagonal = false;
  double max_offdiag = 0.0;
  /// max over samples of |Q_{gamma(t)} - c(t)^{alpha-1} e^{sD_p} Q e^{-sD_p}|
  /// when a certificate is supplied; 0 otherwise.
  double closed_form_residual = 0.0;
};

/// Integrates the flow and measures the off-diagonal part of Q_{gamma(t)}
/// in the orthonormal eigenbasis of Q_{gamma(0)}; algebraic solitons with
/// symmetric Q are flow diagonal.
FlowDiagonalReport flow_diagonal_test(const BracketTensor& mu,
                                      const ReductiveSplit& split,
                                      const InvariantTensor& gamma,
                                      const PreferredDirection& dir, double t0,
                                      double t1, const IntegratorConfig& cfg = {},
                                      const SolitonCertificate* cert = nullptr);

/// Structured text record: c_prime, flow_constant_c, soliton_type, residual,
/// is_algebraic, D (row-major), A (row-major).
std::string certificate_record(const SolitonCertificate& cert);

}  // namespace homflow
