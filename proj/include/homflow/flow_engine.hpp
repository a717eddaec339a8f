#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "homflow/curvature.hpp"
#include "homflow/lie_structures.hpp"
#include "homflow/tensor_calculus.hpp"

namespace homflow {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0;   // <= 0: span of integration
  double min_step = 0.0;   // <= 0: 50 eps max(1,|t|), checked dynamically
  double stop_norm = 1e6;  // halt when the state norm exceeds this
  long max_steps = 2000000;
};

enum class HaltReason {
  ReachedEnd,
  NormExceeded,
  NondegeneracyLoss,
  StepUnderflow,
  MaxSteps
};

std::string to_string(HaltReason r);

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  double max_error_estimate = 0.0;
};

/// Time-stamped samples of a flow solution, one entry per accepted step,
/// with stored derivatives for cubic Hermite dense output.  Coupled
/// integrations carry the conjugation h(t) alongside the primary state in
/// `aux`/`aux_derivs` (aux[0] = I).
struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> derivs;
  std::vector<double> steps;  // accepted step size producing each sample
  std::vector<Matrix> aux;
  std::vector<Matrix> aux_derivs;
  StepStats stats;
  HaltReason halt_reason = HaltReason::ReachedEnd;
  std::string halt_detail;

  int primary_len = 0;  // length of the primary state block
  int aux_dim = 0;      // h is aux_dim x aux_dim when present

  size_t size() const { return times.size(); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  /// Cubic Hermite interpolation between accepted steps.
  Vector sample(double t) const;
  Vector primary_at(double t) const;
  Matrix coupling_at(double t) const;  // h(t); requires aux_dim > 0
};

using OdeRhs = std::function<Vector(double, const Vector&)>;
using OdeMargin = std::function<double(double, const Vector&)>;
using OdeAcceptHook = std::function<void(double, const Vector&)>;
using OdeNorm = std::function<double(double, const Vector&)>;

/// Stage evaluations may throw this to signal that the state left the
/// domain of the right-hand side; the step is retried with a smaller h.
struct StageEvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Embedded Dormand-Prince 5(4) pair with PI step-size control.  When a
/// margin function is given, integration halts at its zero crossing
/// (located by bisection on the dense output).  The stop_norm guard uses
/// halt_norm when given, the plain state norm otherwise.
FlowTrajectory integrate_rk45(const OdeRhs& rhs, double t0, double t1,
                              const Vector& y0, const IntegratorConfig& cfg,
                              const OdeMargin& margin = {},
                              const OdeAcceptHook& on_accept = {},
                              const OdeNorm& halt_norm = {});

/// d gamma/dt = q(gamma), mu fixed.  Halts at the end of the span, on
/// state-norm blow-up, on loss of nondegeneracy (smallest metric eigenvalue
/// below 1e-8) or on step underflow.
FlowTrajectory integrate_geometric_flow(const InvariantTensor& gamma0,
                                        const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const PreferredDirection& dir, double t0,
                                        double t1, const IntegratorConfig& cfg = {});

/// Bracket flow d mu/dt = theta(-diag(0, Q_mu)) mu with gamma fixed, where
/// theta(E)mu = E mu(.,.) - mu(E.,.) - mu(.,E.) and Q_mu solves
/// theta(Q_mu)gamma = q(mu, gamma).  Integrated in orbit coordinates:
/// the conjugation h with dh/dt = -Q_mu h is the integration variable and
/// mu(t) = diag(I, h(t)).mu0 is reconstructed from it, so the trajectory
/// stays on the variety of Lie algebras by construction (h is re-anchored
/// whenever its conditioning degrades).  Jacobi and admissibility residuals
/// are still monitored (scale-normalized) at every accepted step.  The
/// returned trajectory carries h(t) in aux.
FlowTrajectory integrate_bracket_flow(const BracketTensor& mu0,
                                      const ReductiveSplit& split,
                                      const InvariantTensor& gamma,
                                      const PreferredDirection& dir, double t0,
                                      double t1, const IntegratorConfig& cfg = {});

/// theta action of E in gl(g) on a bracket viewed as a (2,1) tensor on g.
BracketTensor theta_bracket(const Matrix& E, const BracketTensor& mu);

enum class CouplingVariant {
  TensorSide,   // dh/dt = -h Q_{gamma(t)}, co-integrated with gamma(t)
  BracketSide,  // dh/dt = -Q_{mu(t)} h,   co-integrated with mu(t)
};

/// Joint integration of the flow and the conjugation h(t), h(0) = I.
/// The determinant of h is monitored; conjugation breakdown throws.
FlowTrajectory integrate_coupling(CouplingVariant variant, const BracketTensor& mu0,
                                  const ReductiveSplit& split,
                                  const InvariantTensor& gamma0,
                                  const PreferredDirection& dir, double t0, double t1,
                                  const IntegratorConfig& cfg = {});

struct EquivalenceResiduals {
  double tensor_residual = 0.0;   // max |h(t)^* gamma0 - gamma(t)|
  double bracket_residual = 0.0;  // max |diag(I,h(t)).mu0 - mu(t)|
};

/// Checks the equivariant-equivalence dictionary between the tensor flow,
/// the bracket flow and the coupling on a common resampled grid.
EquivalenceResiduals verify_equivalence(const FlowTrajectory& gamma_traj,
                                        const FlowTrajectory& mu_traj,
                                        const FlowTrajectory& coupling_traj,
                                        const BracketTensor& mu0,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma0,
                                        int n_samples = 33);

/// Bracket-flow vector field with its radial component (along the scaling
/// ray c.mu) removed; |mu(t)| stays constant and limit points are candidate
/// algebraic solitons.  The normalized field is theta(-diag(0, Q - sigma I))mu,
/// so the same orbit-coordinate integration applies.
FlowTrajectory normalized_bracket_flow(const BracketTensor& mu0,
                                       const ReductiveSplit& split,
                                       const InvariantTensor& gamma,
                                       const PreferredDirection& dir, double t0,
                                       double t1, const IntegratorConfig& cfg = {});

/// Power-law fit |state| ~ C (T - t)^beta over the last `window` accepted
/// samples, with the blow-up time T estimated by scanning the fit residual.
struct BlowupFit {
  bool valid = false;
  double exponent = 0.0;
  double T_est = 0.0;
  double c_lower = 0.0;  // min and max of |state| (T-t)^{-beta} on the window
  double c_upper = 0.0;
};
BlowupFit fit_blowup_exponent(const FlowTrajectory& traj, int window = 30);

/// CSV layout: t, state components (row-major), |state|, step.
void write_trajectory_csv(std::ostream& os, const FlowTrajectory& traj);
void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj);

}  // namespace homflow
