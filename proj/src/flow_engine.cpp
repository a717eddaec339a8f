#include "homflow/flow_engine.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace homflow {

std::string to_string(HaltReason r) {
  switch (r) {
    case HaltReason::ReachedEnd: return "reached_end";
    case HaltReason::NormExceeded: return "state_norm_exceeded";
    case HaltReason::NondegeneracyLoss: return "nondegeneracy_loss";
    case HaltReason::StepUnderflow: return "step_underflow";
    case HaltReason::MaxSteps: return "max_steps";
  }
  return "?";
}

namespace {

Vector hermite(double t, double t0, double t1, const Vector& y0, const Vector& y1,
               const Vector& f0, const Vector& f1) {
  const double h = t1 - t0;
  const double u = (t - t0) / h;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

size_t locate_interval(const std::vector<double>& times, double t) {
  if (times.size() < 2) return 0;
  const bool fwd = times.back() >= times.front();
  size_t lo = 0;
  for (size_t i = 0; i + 1 < times.size(); ++i) {
    if (fwd ? (times[i + 1] >= t) : (times[i + 1] <= t)) return i;
    lo = i;
  }
  return lo;
}

}  // namespace

Vector FlowTrajectory::sample(double t) const {
  if (times.empty()) throw std::logic_error("FlowTrajectory: empty trajectory");
  if (times.size() == 1) return states[0];
  const double lo = std::min(times.front(), times.back());
  const double hi = std::max(times.front(), times.back());
  const double slack = 1e-9 * (1.0 + hi - lo);
  if (t < lo - slack || t > hi + slack)
    throw std::out_of_range("FlowTrajectory: sample time outside trajectory");
  const size_t i = locate_interval(times, t);
  return hermite(t, times[i], times[i + 1], states[i], states[i + 1], derivs[i],
                 derivs[i + 1]);
}

Vector FlowTrajectory::primary_at(double t) const {
  Vector y = sample(t);
  return primary_len > 0 ? Vector(y.head(primary_len)) : y;
}

Matrix FlowTrajectory::coupling_at(double t) const {
  if (aux_dim <= 0 || aux.empty())
    throw std::logic_error("FlowTrajectory: no coupling block");
  if (times.size() == 1) return aux[0];
  const size_t i = locate_interval(times, t);
  Vector v = hermite(t, times[i], times[i + 1], vec_rowmajor(aux[i]),
                     vec_rowmajor(aux[i + 1]), vec_rowmajor(aux_derivs[i]),
                     vec_rowmajor(aux_derivs[i + 1]));
  return unvec_rowmajor(v, aux_dim, aux_dim);
}

FlowTrajectory integrate_rk45(const OdeRhs& rhs, double t0, double t1,
                              const Vector& y0, const IntegratorConfig& cfg,
                              const OdeMargin& margin, const OdeAcceptHook& on_accept,
                              const OdeNorm& halt_norm) {
  // Dormand-Prince 5(4) coefficients
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                      a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (t1 == t0) throw std::invalid_argument("integrate: empty time span");
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double hmax = cfg.max_step > 0 ? cfg.max_step : span;

  auto hmin_at = [&](double t) {
    return cfg.min_step > 0 ? cfg.min_step : 50.0 * DBL_EPSILON * std::max(1.0, std::abs(t));
  };
  auto norm_at = [&](double t, const Vector& y) {
    return halt_norm ? halt_norm(t, y) : y.norm();
  };

  FlowTrajectory traj;
  traj.primary_len = static_cast<int>(y0.size());

  double t = t0;
  Vector y = y0;
  Vector k1 = rhs(t, y);  // a failure here is an error in the initial data

  traj.times.push_back(t);
  traj.states.push_back(y);
  traj.derivs.push_back(k1);
  traj.steps.push_back(0.0);

  double h = dir * std::min({hmax, span / 10.0, 0.01 / (1.0 + k1.norm())});
  double facold = 1e-4;
  const double safe = 0.9, beta = 0.04;
  const double expo1 = 0.2 - beta * 0.75;
  const double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;

  bool last = false;
  while (true) {
    if (traj.stats.accepted + traj.stats.rejected >= cfg.max_steps) {
      traj.halt_reason = HaltReason::MaxSteps;
      traj.halt_detail = "step budget exhausted";
      return traj;
    }
    if (std::abs(h) < hmin_at(t)) {
      traj.halt_reason = HaltReason::StepUnderflow;
      traj.halt_detail = "step size underflow at t = " + std::to_string(t);
      return traj;
    }
    if (dir * (t + h - t1) > 0.0) {
      h = t1 - t;
      last = true;
    } else {
      last = false;
    }

    Vector k2, k3, k4, k5, k6, k7, ynew;
    bool stage_ok = true;
    try {
      k2 = rhs(t + c2 * h, y + h * (a21 * k1));
      k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      k7 = rhs(t + h, ynew);
    } catch (const StageEvalError&) {
      stage_ok = false;
    }

    if (!stage_ok) {
      ++traj.stats.rejected;
      h *= 0.5;
      last = false;
      continue;
    }

    Vector errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (long i = 0; i < y.size(); ++i) {
      const double sk =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y(i)), std::abs(ynew(i)));
      const double r = errv(i) / sk;
      err += r * r;
    }
    err = std::sqrt(err / static_cast<double>(y.size()));
    traj.stats.max_error_estimate = std::max(traj.stats.max_error_estimate, err);

    const double fac11 = std::pow(std::max(err, 1e-16), expo1);
    if (err <= 1.0) {
      // accepted
      facold = std::max(err, 1e-4);
      ++traj.stats.accepted;

      const double t_new = t + h;
      double halt_at = t_new;
      bool halted_by_margin = false;
      if (margin) {
        const double m1 = margin(t_new, ynew);
        if (m1 < 0.0) {
          // bisect the crossing on the Hermite interpolant
          double lo = t, hi = t_new;
          for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-13 * (1.0 + std::abs(hi));
               ++it) {
            const double mid = 0.5 * (lo + hi);
            Vector ymid = hermite(mid, t, t_new, y, ynew, k1, k7);
            if (margin(mid, ymid) < 0.0) hi = mid;
            else lo = mid;
          }
          halt_at = hi;
          ynew = hermite(hi, t, t_new, y, ynew, k1, k7);
          k7 = (halt_at > t) ? Vector(((ynew - y) / (halt_at - t)).eval()) : k1;
          halted_by_margin = true;
        }
      }

      t = halt_at;
      y = ynew;
      k1 = k7;

      traj.times.push_back(t);
      traj.states.push_back(y);
      traj.derivs.push_back(k1);
      traj.steps.push_back(h);
      if (on_accept) on_accept(t, y);

      if (halted_by_margin) {
        traj.halt_reason = HaltReason::NondegeneracyLoss;
        traj.halt_detail = "halted at t = " + std::to_string(t);
        return traj;
      }
      if (norm_at(t, y) >= cfg.stop_norm) {
        traj.halt_reason = HaltReason::NormExceeded;
        traj.halt_detail = "state norm exceeded stop_norm at t = " + std::to_string(t);
        return traj;
      }
      if (last) {
        traj.halt_reason = HaltReason::ReachedEnd;
        return traj;
      }

      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      h = dir * std::min(hmax, std::abs(h) / fac);
    } else {
      ++traj.stats.rejected;
      h = dir * (std::abs(h) / std::min(facc1, fac11 / safe));
      last = false;
    }
  }
}

BracketTensor theta_bracket(const Matrix& E, const BracketTensor& mu) {
  const int d = mu.dim();
  std::vector<Matrix> comps(d);
  const Matrix Et = E.transpose();
  for (int k = 0; k < d; ++k) {
    comps[k] = -Et * mu.comp(k) - mu.comp(k) * E;
    for (int m = 0; m < d; ++m) comps[k] += E(k, m) * mu.comp(m);
  }
  BracketTensor out(d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) out.set_entry(k, i, j, comps[k](i, j));
  return out;
}

namespace {

/// Margin for metric-like kinds: smallest eigenvalue of the symmetrized
/// metric component minus the degeneracy floor.
OdeMargin metric_margin(const InvariantTensor& gamma0) {
  if (gamma0.kind() != TensorKind::Metric && gamma0.kind() != TensorKind::PseudoMetric)
    return {};
  const InvariantTensor shape = gamma0;
  return [shape](double, const Vector& y) {
    InvariantTensor g = shape.with_flat(y);
    Matrix G = g.single().as_matrix_cov2();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()));
    return es.eigenvalues().cwiseAbs().minCoeff() - 1e-8;
  };
}

/// The cubic Hermite dense output limits how coarse accepted steps may be
/// if interpolated samples are to hold integrator-level accuracy; cap the
/// default step of the flow integrators accordingly.
IntegratorConfig with_dense_cap(IntegratorConfig cfg, double t0, double t1) {
  if (cfg.max_step <= 0.0) cfg.max_step = std::min(std::abs(t1 - t0), 0.2);
  return cfg;
}

Matrix embed_block(const Matrix& Q, const ReductiveSplit& split) {
  Matrix E = Matrix::Zero(split.total(), split.total());
  E.block(split.k_dim, split.k_dim, split.p_dim, split.p_dim) = Q;
  return E;
}

Matrix embed_hbar(const Matrix& h, const ReductiveSplit& split) {
  Matrix hbar = Matrix::Identity(split.total(), split.total());
  hbar.block(split.k_dim, split.k_dim, split.p_dim, split.p_dim) = h;
  return hbar;
}

void check_residuals(const BracketTensor& mu, const ReductiveSplit& split,
                     const InvariantTensor& gamma, double bound, double t) {
  const double n = mu.norm();
  double worst = jacobi_residual(mu) / (1.0 + n * n);
  if (split.k_dim > 0) {
    AdmissibilityReport rep = check_admissibility(mu, split, gamma, 1e30);
    worst = std::max(worst, rep.res_i / (1.0 + n));
    worst = std::max(worst, rep.res_iv / (1.0 + n));
  }
  if (worst > bound)
    throw std::runtime_error(
        "bracket flow: Jacobi/admissibility residual escaped its bound at t = " +
        std::to_string(t) + " (integrator tolerance too loose)");
}

/// Gauss-Newton projection onto the variety of Lie algebras: linearizes the
/// cyclic Jacobi residual around mu and removes its minimum-norm preimage.
/// Two iterations drive a small off-variety defect to round-off level.
BracketTensor project_to_variety(const BracketTensor& mu, int iterations = 6) {
  const int d = mu.dim();
  if (d < 3) return mu;
  std::vector<std::array<int, 3>> unknowns;  // (k, i, j) with i < j
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) unknowns.push_back({k, i, j});
  std::vector<std::array<int, 3>> triples;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int l = j + 1; l < d; ++l) triples.push_back({i, j, l});

  auto cyclic = [d](const BracketTensor& a, const BracketTensor& b, int i, int j,
                    int l) {
    const Vector ei = Vector::Unit(d, i), ej = Vector::Unit(d, j),
                 el = Vector::Unit(d, l);
    return Vector(a.apply(b.apply_basis(i, j), el) + a.apply(b.apply_basis(j, l), ei) +
                  a.apply(b.apply_basis(l, i), ej));
  };
  const long neq = static_cast<long>(triples.size()) * d;
  auto residual_of = [&](const BracketTensor& b) {
    Vector r(neq);
    long row = 0;
    for (const auto& [i, j, l] : triples) {
      r.segment(row, d) = cyclic(b, b, i, j, l);
      row += d;
    }
    return r;
  };

  BracketTensor cur = mu;
  Vector r = residual_of(cur);
  for (int it = 0; it < iterations; ++it) {
    if (r.norm() < 1e-15 * (1.0 + cur.norm() * cur.norm())) break;
    Matrix A(neq, static_cast<long>(unknowns.size()));
    for (size_t c = 0; c < unknowns.size(); ++c) {
      BracketTensor delta(d);
      delta.set_entry(unknowns[c][0], unknowns[c][1], unknowns[c][2], 1.0);
      long row = 0;
      for (const auto& [i, j, l] : triples) {
        A.block(row, c, d, 1) =
            cyclic(cur, delta, i, j, l) + cyclic(delta, cur, i, j, l);
        row += d;
      }
    }
    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-13);
    Vector step = svd.solve(r);
    BracketTensor next = cur;
    for (size_t c = 0; c < unknowns.size(); ++c) {
      const auto& [k, i, j] = unknowns[c];
      next.set_entry(k, i, j, next.component(k, i, j) - step(c));
    }
    Vector rn = residual_of(next);
    if (rn.norm() >= 0.5 * r.norm()) break;  // stalled
    cur = next;
    r = rn;
  }
  return cur;
}

/// Orbit-coordinate integration shared by the plain and the normalized
/// bracket flow: the state is the conjugation block h, mu = diag(I,h).mu0,
/// dh/dt = -(Q_mu - sigma I) h.  h is re-anchored (mu0 <- mu, h <- I)
/// whenever its conditioning exceeds a fixed bound; the re-anchor point is
/// projected back onto the variety so that the defect amplified by the
/// subsequent group action is always at round-off level.
FlowTrajectory bracket_flow_orbit(const BracketTensor& mu_start,
                                  const ReductiveSplit& split,
                                  const InvariantTensor& gamma,
                                  const PreferredDirection& dir, double t0, double t1,
                                  const IntegratorConfig& cfg_in, bool normalized) {
  const IntegratorConfig cfg = with_dense_cap(cfg_in, t0, t1);
  AdmissibilityReport adm = check_admissibility(mu_start, split, gamma);
  if (!adm.all_pass())
    throw std::invalid_argument("bracket flow: inadmissible input data");

  const int d = mu_start.dim();
  const int p = split.p_dim;
  const double cond_limit = 10.0;

  FlowTrajectory out;
  out.primary_len = static_cast<int>(d) * d * d;
  out.aux_dim = p;

  if (normalized && mu_start.is_zero()) {
    out.times = {t0, t1};
    Vector flat = mu_start.flatten();
    out.states = {flat, flat};
    out.derivs = {Vector::Zero(flat.size()), Vector::Zero(flat.size())};
    out.steps = {0.0, t1 - t0};
    out.aux = {Matrix::Identity(p, p), Matrix::Identity(p, p)};
    out.aux_derivs = {Matrix::Zero(p, p), Matrix::Zero(p, p)};
    return out;
  }

  StabilizerDecomposition dec = stabilizer_algebra(gamma);
  OperatorSolver solver(gamma, dec);

  BracketTensor anchor = mu_start;
  Matrix h_base = Matrix::Identity(p, p);
  double t_cursor = t0;

  auto effective_operator = [&](const BracketTensor& mu, double* raw_norm = nullptr) {
    Tensor q = dir.evaluate(mu, split, gamma);
    Matrix Q;
    try {
      Q = solver.solve(q, 1e-5);
    } catch (const std::runtime_error& e) {
      throw StageEvalError(e.what());
    }
    if (raw_norm)
      *raw_norm = theta_bracket(embed_block(Q, split), mu).norm();
    if (normalized) {
      // remove the component along the scaling ray: d/dc (c.mu) at c = 1
      // equals theta(-diag(0, I)) mu
      Vector f = theta_bracket(embed_block(Q, split), mu).flatten();
      Vector radial = theta_bracket(embed_block(Matrix::Identity(p, p), split), mu)
                          .flatten();
      const double denom = radial.squaredNorm();
      if (denom > 1e-30)
        Q -= (f.dot(radial) / denom) * Matrix::Identity(p, p);
    }
    return Q;
  };

  auto mu_of = [&](const Vector& yh) {
    return act_basis_change(embed_hbar(unvec_rowmajor(yh, p, p), split), anchor,
                            &split);
  };

  const int max_segments = 1000;
  for (int segment = 0; segment < max_segments; ++segment) {
    if (normalized) {
      // A normalized field below the round-off floor of its own evaluation
      // means the flow has converged; what remains of h(t) is pure gauge
      // motion along the stabilizer, which no parametrization can track
      // indefinitely.  Hold the state instead.
      double raw_norm = 0.0;
      Matrix Q0 = effective_operator(anchor, &raw_norm);
      Vector F0 = -theta_bracket(embed_block(Q0, split), anchor).flatten();
      if (F0.norm() <= 1e-12 * (1.0 + raw_norm)) {
        if (out.times.empty()) {
          out.times.push_back(t_cursor);
          out.states.push_back(anchor.flatten());
          out.derivs.push_back(F0);
          out.steps.push_back(0.0);
          out.aux.push_back(Matrix::Identity(p, p));
          out.aux_derivs.push_back(Matrix::Zero(p, p));
        }
        out.times.push_back(t1);
        out.states.push_back(anchor.flatten());
        out.derivs.push_back(F0);
        out.steps.push_back(t1 - t_cursor);
        out.aux.push_back(out.aux.back());
        out.aux_derivs.push_back(Matrix::Zero(p, p));
        out.halt_reason = HaltReason::ReachedEnd;
        return out;
      }
    }
    auto rhs = [&](double, const Vector& yh) {
      Matrix h = unvec_rowmajor(yh, p, p);
      Matrix Q = effective_operator(mu_of(yh));
      return vec_rowmajor(-Q * h);
    };
    auto margin = [&](double, const Vector& yh) {
      Eigen::JacobiSVD<Matrix> svd(unvec_rowmajor(yh, p, p));
      const double smin = svd.singularValues()(p - 1);
      if (smin <= 0.0) return -1.0;
      return cond_limit - svd.singularValues()(0) / smin;
    };
    auto hook = [&](double t, const Vector& yh) {
      check_residuals(mu_of(yh), split, gamma, 1e-7, t);
    };
    auto norm_fn = [&](double, const Vector& yh) { return mu_of(yh).norm(); };

    FlowTrajectory seg =
        integrate_rk45(rhs, t_cursor, t1, vec_rowmajor(Matrix::Identity(p, p)), cfg,
                       margin, hook, norm_fn);

    // re-express the segment in bracket coordinates, composing h over segments
    const size_t start_idx = segment == 0 ? 0 : 1;  // drop duplicate join sample
    for (size_t i = start_idx; i < seg.size(); ++i) {
      Matrix h_seg = unvec_rowmajor(seg.states[i], p, p);
      Matrix hdot_seg = unvec_rowmajor(seg.derivs[i], p, p);
      BracketTensor mu = mu_of(seg.states[i]);
      const Matrix Q = -hdot_seg * h_seg.inverse();
      out.times.push_back(seg.times[i]);
      out.states.push_back(mu.flatten());
      out.derivs.push_back(-theta_bracket(embed_block(Q, split), mu).flatten());
      out.steps.push_back(seg.steps[i]);
      out.aux.push_back(h_seg * h_base);
      out.aux_derivs.push_back(hdot_seg * h_base);
    }
    out.stats.accepted += seg.stats.accepted;
    out.stats.rejected += seg.stats.rejected;
    out.stats.max_error_estimate =
        std::max(out.stats.max_error_estimate, seg.stats.max_error_estimate);

    if (seg.halt_reason != HaltReason::NondegeneracyLoss) {
      // genuine halt (end of span, blow-up, underflow, budget)
      out.halt_reason = seg.halt_reason;
      out.halt_detail = seg.halt_detail;
      return out;
    }

    // conditioning trigger: re-anchor at the current bracket and continue
    t_cursor = seg.times.back();
    anchor = project_to_variety(
        BracketTensor::from_flat_unchecked(d, out.states.back()));
    h_base = out.aux.back();
  }
  out.halt_reason = HaltReason::MaxSteps;
  out.halt_detail = "re-anchor budget exhausted";
  return out;
}

}  // namespace

FlowTrajectory integrate_geometric_flow(const InvariantTensor& gamma0,
                                        const BracketTensor& mu,
                                        const ReductiveSplit& split,
                                        const PreferredDirection& dir, double t0,
                                        double t1, const IntegratorConfig& cfg) {
  auto rhs = [&gamma0, &mu, &split, &dir](double, const Vector& y) {
    InvariantTensor g = gamma0.with_flat(y);
    try {
      return dir.evaluate(mu, split, g).data;
    } catch (const std::exception& e) {
      throw StageEvalError(e.what());
    }
  };
  // evaluate once on the initial data so that genuine input errors surface
  dir.evaluate(mu, split, gamma0);
  return integrate_rk45(rhs, t0, t1, gamma0.flatten(), with_dense_cap(cfg, t0, t1),
                        metric_margin(gamma0));
}

FlowTrajectory integrate_bracket_flow(const BracketTensor& mu0,
                                      const ReductiveSplit& split,
                                      const InvariantTensor& gamma,
                                      const PreferredDirection& dir, double t0,
                                      double t1, const IntegratorConfig& cfg) {
  return bracket_flow_orbit(mu0, split, gamma, dir, t0, t1, cfg, false);
}

FlowTrajectory normalized_bracket_flow(const BracketTensor& mu0,
                                       const ReductiveSplit& split,
                                       const InvariantTensor& gamma,
                                       const PreferredDirection& dir, double t0,
                                       double t1, const IntegratorConfig& cfg) {
  return bracket_flow_orbit(mu0, split, gamma, dir, t0, t1, cfg, true);
}

FlowTrajectory integrate_coupling(CouplingVariant variant, const BracketTensor& mu0,
                                  const ReductiveSplit& split,
                                  const InvariantTensor& gamma0,
                                  const PreferredDirection& dir, double t0, double t1,
                                  const IntegratorConfig& cfg) {
  const int p = split.p_dim;
  const long hlen = static_cast<long>(p) * p;

  if (variant == CouplingVariant::BracketSide) {
    // the orbit-coordinate bracket flow already carries h with
    // dh/dt = -Q_mu h, h(0) = I
    FlowTrajectory traj =
        bracket_flow_orbit(mu0, split, gamma0, dir, t0, t1, cfg, false);
    for (size_t i = 0; i < traj.size(); ++i) {
      if (std::abs(traj.aux[i].determinant()) < 1e-12)
        throw std::runtime_error(
            "integrate_coupling: conjugation breakdown (det(h) < 1e-12)");
    }
    return traj;
  }

  const long glen = gamma0.flatten().size();
  auto rhs = [&, glen](double, const Vector& y) {
    InvariantTensor g = gamma0.with_flat(y.head(glen));
    Matrix h = unvec_rowmajor(y.tail(hlen), p, p);
    try {
      Tensor q = dir.evaluate(mu0, split, g);
      StabilizerDecomposition dec = stabilizer_algebra(g);
      Matrix Q = OperatorSolver(g, dec).solve(q, 1e-5);
      Vector out(glen + hlen);
      out.head(glen) = q.data;
      out.tail(hlen) = vec_rowmajor(-h * Q);
      return out;
    } catch (const std::exception& e) {
      throw StageEvalError(e.what());
    }
  };
  Vector y0(glen + hlen);
  y0.head(glen) = gamma0.flatten();
  y0.tail(hlen) = vec_rowmajor(Matrix::Identity(p, p));
  auto hook = [hlen, p](double t, const Vector& y) {
    const double det = unvec_rowmajor(y.tail(hlen), p, p).determinant();
    if (std::abs(det) < 1e-12)
      throw std::runtime_error(
          "integrate_coupling: conjugation breakdown (det(h) < 1e-12) at t = " +
          std::to_string(t));
  };
  OdeMargin margin;
  if (OdeMargin base = metric_margin(gamma0))
    margin = [base, glen](double t, const Vector& y) {
      return base(t, y.head(glen));
    };
  FlowTrajectory traj =
      integrate_rk45(rhs, t0, t1, y0, with_dense_cap(cfg, t0, t1), margin, hook);

  // split the joint state into the tensor block and the coupling block
  FlowTrajectory out;
  out.primary_len = static_cast<int>(glen);
  out.aux_dim = p;
  out.times = traj.times;
  out.steps = traj.steps;
  out.stats = traj.stats;
  out.halt_reason = traj.halt_reason;
  out.halt_detail = traj.halt_detail;
  out.states.reserve(traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    out.states.push_back(traj.states[i].head(glen));
    out.derivs.push_back(traj.derivs[i].head(glen));
    out.aux.push_back(unvec_rowmajor(traj.states[i].tail(hlen), p, p));
    out.aux_derivs.push_back(unvec_rowmajor(traj.derivs[i].tail(hlen), p, p));
  }
  return out;
}

EquivalenceResiduals verify_equivalence(const FlowTrajectory& gamma_traj,
                                        const FlowTrajectory& mu_traj,
                                        const FlowTrajectory& coupling_traj,
                                        const BracketTensor& mu0,
                                        const ReductiveSplit& split,
                                        const InvariantTensor& gamma0, int n_samples) {
  const double lo = std::max({std::min(gamma_traj.t_begin(), gamma_traj.t_end()),
                              std::min(mu_traj.t_begin(), mu_traj.t_end()),
                              std::min(coupling_traj.t_begin(), coupling_traj.t_end())});
  const double hi = std::min({std::max(gamma_traj.t_begin(), gamma_traj.t_end()),
                              std::max(mu_traj.t_begin(), mu_traj.t_end()),
                              std::max(coupling_traj.t_begin(), coupling_traj.t_end())});
  if (hi <= lo)
    throw std::invalid_argument("verify_equivalence: trajectories do not overlap in time");

  EquivalenceResiduals out;
  for (int i = 0; i < n_samples; ++i) {
    const double t = lo + (hi - lo) * i / (n_samples - 1);
    Matrix h = coupling_traj.coupling_at(t);
    Eigen::FullPivLU<Matrix> lu(h);
    if (!lu.isInvertible())
      throw std::runtime_error("verify_equivalence: singular coupling matrix");

    // (iii): gamma(t) = h(t)^* gamma0 = group_action(h^{-1}, gamma0)
    InvariantTensor pulled = group_action(lu.inverse(), gamma0);
    Vector gt = gamma_traj.primary_at(t);
    out.tensor_residual =
        std::max(out.tensor_residual, (pulled.flatten() - gt).norm());

    // (iv): mu(t) = diag(I_k, h(t)) . mu0
    BracketTensor moved = act_basis_change(embed_hbar(h, split), mu0, &split);
    Vector mt = mu_traj.primary_at(t);
    out.bracket_residual =
        std::max(out.bracket_residual, (moved.flatten() - mt).norm());
  }
  return out;
}

BlowupFit fit_blowup_exponent(const FlowTrajectory& traj, int window) {
  BlowupFit fit;
  const int n = static_cast<int>(traj.size());
  if (n < 5) return fit;
  const int w = std::min(window, n - 1);
  std::vector<double> ts, ns;
  for (int i = n - w; i < n; ++i) {
    ts.push_back(traj.times[i]);
    ns.push_back(traj.states[i].norm());
  }
  const double t_last = ts.back();
  const double span = t_last - ts.front();
  if (span <= 0.0) return fit;

  auto sse_for = [&](double T) {
    // linear regression of log n on log(T - t)
    const int m = static_cast<int>(ts.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
      const double x = std::log(T - ts[i]);
      const double y = std::log(ns[i]);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    const double beta = (m * sxy - sx * sy) / denom;
    const double alpha = (sy - beta * sx) / m;
    double sse = 0;
    for (int i = 0; i < m; ++i) {
      const double r = std::log(ns[i]) - (alpha + beta * std::log(T - ts[i]));
      sse += r * r;
    }
    return std::pair<double, double>(sse, beta);
  };

  // golden-section scan of T on log(T - t_last)
  double a = std::log(span * 1e-9), b = std::log(span * 10.0);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = sse_for(t_last + std::exp(c1)).first;
  double f2 = sse_for(t_last + std::exp(c2)).first;
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      b = c2; c2 = c1; f2 = f1;
      c1 = b - gr * (b - a);
      f1 = sse_for(t_last + std::exp(c1)).first;
    } else {
      a = c1; c1 = c2; f1 = f2;
      c2 = a + gr * (b - a);
      f2 = sse_for(t_last + std::exp(c2)).first;
    }
  }
  const double T = t_last + std::exp(0.5 * (a + b));
  fit.valid = true;
  fit.T_est = T;
  fit.exponent = sse_for(T).second;
  fit.c_lower = 1e300;
  fit.c_upper = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    const double c = ns[i] * std::pow(T - ts[i], -fit.exponent);
    fit.c_lower = std::min(fit.c_lower, c);
    fit.c_upper = std::max(fit.c_upper, c);
  }
  return fit;
}

void write_trajectory_csv(std::ostream& os, const FlowTrajectory& traj) {
  const long m = traj.states.empty() ? 0 : traj.states[0].size();
  os << "t";
  for (long i = 0; i < m; ++i) os << ",x" << i;
  os << ",norm,step\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (size_t i = 0; i < traj.size(); ++i) {
    put(traj.times[i]);
    for (long j = 0; j < m; ++j) {
      os << ',';
      put(traj.states[i](j));
    }
    os << ',';
    put(traj.states[i].norm());
    os << ',';
    put(traj.steps[i]);
    os << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trajectory file: " + path);
  write_trajectory_csv(f, traj);
}

}  // namespace homflow
