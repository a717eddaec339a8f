#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "homflow/flow_engine.hpp"
#include "homflow/soliton_lab.hpp"
#include "test_support.hpp"

using namespace homflow;
using namespace testsupport;

namespace {

const ReductiveSplit kTriv3 = ReductiveSplit::trivial(3);

/// Ricci flow of diag metrics on the Heisenberg group in closed form:
/// g(t) = diag((3t+1)^{1/3}, (3t+1)^{1/3}, (3t+1)^{-1/3}).
Matrix heisenberg_metric_closed_form(double t) {
  const double c = std::cbrt(3.0 * t + 1.0);
  return diag3(c, c, 1.0 / c);
}

}  // namespace

TEST_CASE("geometric flow on an abelian bracket is constant") {
  InvariantTensor g0 = InvariantTensor::metric(diag3(1.0, 2.0, 0.5));
  FlowTrajectory traj = integrate_geometric_flow(g0, abelian(3), kTriv3,
                                                 ricci_flow_direction(), 0.0, 1.0);
  CHECK(traj.halt_reason == HaltReason::ReachedEnd);
  CHECK((traj.states.back() - g0.flatten()).norm() < 1e-12);
}

TEST_CASE("Heisenberg Ricci flow matches the closed form") {
  InvariantTensor g0 = InvariantTensor::euclidean(3);
  FlowTrajectory traj = integrate_geometric_flow(g0, heisenberg3(), kTriv3,
                                                 ricci_flow_direction(), 0.0, 1.0);
  REQUIRE(traj.halt_reason == HaltReason::ReachedEnd);
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    Matrix G = g0.with_flat(traj.sample(t)).single().as_matrix_cov2();
    Matrix expect = heisenberg_metric_closed_form(t);
    CHECK((G - expect).norm() < 1e-6 * expect.norm());
  }
}

TEST_CASE("shrinking Einstein metric halts by nondegeneracy loss near t = 1") {
  InvariantTensor g0 = InvariantTensor::euclidean(3);
  FlowTrajectory traj = integrate_geometric_flow(g0, su2(), kTriv3,
                                                 ricci_flow_direction(), 0.0, 2.0);
  CHECK(traj.halt_reason == HaltReason::NondegeneracyLoss);
  CHECK(traj.t_end() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("bracket flow on an abelian bracket is constant") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  FlowTrajectory traj = integrate_bracket_flow(abelian(3), kTriv3, g,
                                               ricci_flow_direction(), 0.0, 1.0);
  CHECK((traj.states.back() - abelian(3).flatten()).norm() < 1e-12);
}

TEST_CASE("Heisenberg bracket flow follows the scaling ray") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  FlowTrajectory traj = integrate_bracket_flow(heisenberg3(), kTriv3, g,
                                               ricci_flow_direction(), 0.0, 10.0);
  REQUIRE(traj.halt_reason == HaltReason::ReachedEnd);
  const Vector u0 = traj.states.front() / traj.states.front().norm();
  for (size_t i = 0; i < traj.size(); ++i) {
    const Vector& y = traj.states[i];
    // direction constant, norm sqrt(2) (3t+1)^{-1/2}
    CHECK((y / y.norm() - u0).norm() < 1e-6);
    CHECK(y.norm() ==
          doctest::Approx(std::sqrt(2.0) / std::sqrt(3.0 * traj.times[i] + 1.0))
              .epsilon(1e-6));
  }
}

TEST_CASE("su(2) bracket flow blows up with exponent -1/2") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  IntegratorConfig cfg;
  cfg.stop_norm = 1e6;
  FlowTrajectory traj =
      integrate_bracket_flow(su2(), kTriv3, g, ricci_flow_direction(), 0.0, 10.0, cfg);
  REQUIRE(traj.halt_reason == HaltReason::NormExceeded);
  // exact solution: |mu(t)| = sqrt(6) (1-t)^{-1/2}, T = 1
  CHECK(traj.t_end() == doctest::Approx(1.0).epsilon(1e-6));

  BlowupFit fit = fit_blowup_exponent(traj, 30);
  REQUIRE(fit.valid);
  CHECK(fit.exponent == doctest::Approx(-0.5).epsilon(0.1));
  CHECK(std::abs(fit.exponent + 0.5) < 0.05);
  CHECK(fit.T_est == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(fit.c_lower > 0.0);
  CHECK(fit.c_upper < 10.0 * std::sqrt(6.0));
  CHECK(fit.c_upper / fit.c_lower < 2.0);  // constants bounded above and below
}

TEST_CASE("Jacobi residual stays small along bracket flows") {
  Rng rng(51);
  InvariantTensor g = InvariantTensor::euclidean(3);
  for (int rep = 0; rep < 3; ++rep) {
    BracketTensor mu0 = random_unimodular3(rng);
    FlowTrajectory traj =
        integrate_bracket_flow(mu0, kTriv3, g, ricci_flow_direction(), 0.0, 0.5);
    for (const Vector& y : traj.states)
      CHECK(jacobi_residual(BracketTensor::from_flat_unchecked(3, y)) < 1e-7);
  }
}

TEST_CASE("coupling with the zero direction stays at the identity") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  PreferredDirection zero = zero_direction(0.0, 2, 0);
  for (CouplingVariant variant :
       {CouplingVariant::TensorSide, CouplingVariant::BracketSide}) {
    FlowTrajectory traj =
        integrate_coupling(variant, heisenberg3(), kTriv3, g, zero, 0.0, 1.0);
    CHECK((traj.aux.front() - Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK((traj.aux.back() - Matrix::Identity(3, 3)).norm() < 1e-10);
  }
}

TEST_CASE("Heisenberg coupling matches its closed form") {
  // h(t) = c(t)^{1/(r-s)} e^{-s(t) D_p} with c = 3, D_p = diag(1,1,2), r-s = 2
  InvariantTensor g = InvariantTensor::euclidean(3);
  FlowTrajectory traj =
      integrate_coupling(CouplingVariant::TensorSide, heisenberg3(), kTriv3, g,
                         ricci_flow_direction(), 0.0, 1.0);
  REQUIRE(traj.halt_reason == HaltReason::ReachedEnd);
  for (double t : {0.3, 0.6, 1.0}) {
    const double ct = 3.0 * t + 1.0;
    const double st = std::log(ct) / 3.0;
    Matrix expect = std::sqrt(ct) * diag3(std::exp(-st), std::exp(-st), std::exp(-2 * st));
    CHECK((traj.coupling_at(t) - expect).norm() < 1e-6 * expect.norm());
  }
}

TEST_CASE("both coupling variants agree on random unimodular brackets") {
  Rng rng(52);
  InvariantTensor g = InvariantTensor::euclidean(3);
  BracketTensor mu0 = random_unimodular3(rng);
  FlowTrajectory a = integrate_coupling(CouplingVariant::TensorSide, mu0, kTriv3, g,
                                        ricci_flow_direction(), 0.0, 0.5);
  FlowTrajectory b = integrate_coupling(CouplingVariant::BracketSide, mu0, kTriv3, g,
                                        ricci_flow_direction(), 0.0, 0.5);
  for (double t : {0.1, 0.25, 0.4, 0.5})
    CHECK((a.coupling_at(t) - b.coupling_at(t)).norm() < 1e-6);
}

TEST_CASE("verify_equivalence") {
  InvariantTensor g = InvariantTensor::euclidean(3);

  SUBCASE("zero direction gives zero residuals") {
    PreferredDirection zero = zero_direction(0.0, 2, 0);
    FlowTrajectory tg = integrate_coupling(CouplingVariant::TensorSide, heisenberg3(),
                                           kTriv3, g, zero, 0.0, 1.0);
    FlowTrajectory tm = integrate_coupling(CouplingVariant::BracketSide, heisenberg3(),
                                           kTriv3, g, zero, 0.0, 1.0);
    EquivalenceResiduals res = verify_equivalence(tg, tm, tm, heisenberg3(), kTriv3, g);
    CHECK(res.tensor_residual < 1e-10);
    CHECK(res.bracket_residual < 1e-10);
  }

  SUBCASE("Heisenberg soliton over [0,1]") {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-12;
    FlowTrajectory tg = integrate_coupling(CouplingVariant::TensorSide, heisenberg3(),
                                           kTriv3, g, ricci_flow_direction(), 0.0, 1.0,
                                           cfg);
    FlowTrajectory tm = integrate_coupling(CouplingVariant::BracketSide, heisenberg3(),
                                           kTriv3, g, ricci_flow_direction(), 0.0, 1.0,
                                           cfg);
    EquivalenceResiduals res = verify_equivalence(tg, tm, tg, heisenberg3(), kTriv3, g);
    CHECK(res.tensor_residual < 1e-6);
    CHECK(res.bracket_residual < 1e-6);
    // cross-variant: the bracket-side coupling reproduces the same dictionary
    EquivalenceResiduals cross = verify_equivalence(tg, tm, tm, heisenberg3(), kTriv3, g);
    CHECK(cross.tensor_residual < 1e-6);
    CHECK(cross.bracket_residual < 1e-6);
  }

  SUBCASE("random unimodular brackets over [0, 0.5]") {
    Rng rng(53);
    for (int rep = 0; rep < 3; ++rep) {
      BracketTensor mu0 = random_unimodular3(rng);
      FlowTrajectory tg = integrate_coupling(CouplingVariant::TensorSide, mu0, kTriv3,
                                             g, ricci_flow_direction(), 0.0, 0.5);
      FlowTrajectory tm = integrate_coupling(CouplingVariant::BracketSide, mu0, kTriv3,
                                             g, ricci_flow_direction(), 0.0, 0.5);
      EquivalenceResiduals res = verify_equivalence(tg, tm, tm, mu0, kTriv3, g);
      CHECK(res.tensor_residual < 1e-5);
      CHECK(res.bracket_residual < 1e-5);
    }
  }
}

TEST_CASE("normalized bracket flow") {
  InvariantTensor g3 = InvariantTensor::euclidean(3);

  SUBCASE("soliton starts are stationary") {
    for (BracketTensor mu0 : {heisenberg3(), su2()}) {
      FlowTrajectory traj = normalized_bracket_flow(mu0, kTriv3, g3,
                                                    ricci_flow_direction(), 0.0, 10.0);
      const Vector u0 = traj.states.front() / traj.states.front().norm();
      for (const Vector& y : traj.states) CHECK((y / y.norm() - u0).norm() < 1e-6);
    }
  }

  SUBCASE("abelian start is stationary") {
    FlowTrajectory traj = normalized_bracket_flow(abelian(3), kTriv3, g3,
                                                  ricci_flow_direction(), 0.0, 5.0);
    CHECK((traj.states.back() - abelian(3).flatten()).norm() < 1e-12);
  }

  SUBCASE("norm is conserved") {
    Rng rng(54);
    BracketTensor mu0 = random_unimodular3(rng);
    FlowTrajectory traj = normalized_bracket_flow(mu0, kTriv3, g3,
                                                  ricci_flow_direction(), 0.0, 5.0);
    for (const Vector& y : traj.states)
      CHECK(y.norm() == doctest::Approx(mu0.norm()).epsilon(1e-7));
  }

  SUBCASE("every metric presentation of h3 + R is already a soliton ray") {
    // the metric moduli space of h3 + R is a single point up to scaling, so
    // the normalized flow is stationary on the whole orbit
    Rng rng(56);
    Matrix twist = Matrix::Identity(4, 4) + 0.3 * random_matrix(4, rng);
    REQUIRE(std::abs(twist.determinant()) > 0.1);
    BracketTensor start = act_basis_change(twist, heisenberg_plus_abelian(1));
    InvariantTensor g4 = InvariantTensor::euclidean(4);
    SolitonCertificate cert = solve_semi_algebraic(start, ReductiveSplit::trivial(4),
                                                   g4, ricci_flow_direction());
    CHECK(cert.residual < 1e-8);
    CHECK(cert.type == SolitonType::Expanding);
    FlowTrajectory traj = normalized_bracket_flow(start, ReductiveSplit::trivial(4), g4,
                                                  ricci_flow_direction(), 0.0, 10.0);
    CHECK(traj.derivs.back().norm() < 1e-8);
  }

  SUBCASE("perturbed nilpotent start converges to the soliton ray") {
    Rng rng(55);
    // a generic point of the GL-orbit of the filiform algebra: same algebra,
    // but not the soliton metric presentation
    Matrix twist = Matrix::Identity(4, 4) + 0.3 * random_matrix(4, rng);
    REQUIRE(std::abs(twist.determinant()) > 0.1);
    BracketTensor start = act_basis_change(twist, filiform4());
    InvariantTensor g4 = InvariantTensor::euclidean(4);
    REQUIRE(solve_semi_algebraic(start, ReductiveSplit::trivial(4), g4,
                                 ricci_flow_direction())
                .residual > 1e-3);  // genuinely away from every soliton ray

    FlowTrajectory traj = normalized_bracket_flow(start, ReductiveSplit::trivial(4), g4,
                                                  ricci_flow_direction(), 0.0, 50.0);
    REQUIRE(traj.halt_reason == HaltReason::ReachedEnd);
    CHECK(traj.derivs.front().norm() > 1e-3);
    CHECK(traj.derivs.back().norm() < 1e-6);

    // the limit is a soliton ray: certify post-hoc
    BracketTensor limit = BracketTensor::from_flat_unchecked(4, traj.states.back());
    SolitonCertificate cert = solve_semi_algebraic(limit, ReductiveSplit::trivial(4),
                                                   g4, ricci_flow_direction());
    CHECK(cert.residual < 1e-6);
    CHECK(cert.type == SolitonType::Expanding);
  }
}

TEST_CASE("time symmetry: backward then forward returns the state") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  FlowTrajectory back = integrate_geometric_flow(g, heisenberg3(), kTriv3,
                                                 ricci_flow_direction(), 0.0, -0.2);
  REQUIRE(back.halt_reason == HaltReason::ReachedEnd);
  InvariantTensor mid = g.with_flat(back.states.back());
  FlowTrajectory fwd = integrate_geometric_flow(mid, heisenberg3(), kTriv3,
                                                ricci_flow_direction(), -0.2, 0.0);
  CHECK((fwd.states.back() - g.flatten()).norm() < 1e-7);
}

TEST_CASE("Ad(K)-invariance is preserved along an isotropy bracket flow") {
  // so(3) acting on R^3 with the isotropy Casimir direction
  // q = theta(sum_z (ad z|_p)^2) gamma, an equivariant test direction
  BracketTensor mu0 = so3_semidirect_r3();
  ReductiveSplit split{3, 3};
  InvariantTensor g = InvariantTensor::euclidean(3);

  PreferredDirection casimir;
  casimir.name = "isotropy_casimir";
  casimir.alpha = 0.0;
  casimir.r = 2;
  casimir.s = 0;
  casimir.evaluate = [](const BracketTensor& mu, const ReductiveSplit& sp,
                        const InvariantTensor& gamma) {
    Matrix C = Matrix::Zero(sp.p_dim, sp.p_dim);
    for (int z = 0; z < sp.k_dim; ++z) {
      Matrix a = mu.ad_p(z, sp);
      C += a * a;
    }
    return theta_action(C, gamma.single());
  };

  FlowTrajectory traj =
      integrate_bracket_flow(mu0, split, g, casimir, 0.0, 0.3);
  REQUIRE(traj.halt_reason == HaltReason::ReachedEnd);
  CHECK(traj.size() > 2);
  for (const Vector& y : traj.states) {
    BracketTensor mu = BracketTensor::from_flat_unchecked(6, y);
    CHECK(adK_invariance_residual(mu, split, g) < 1e-7);
    CHECK(jacobi_residual(mu) < 1e-7);
  }
}

TEST_CASE("trajectory CSV export") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  FlowTrajectory traj = integrate_geometric_flow(g, heisenberg3(), kTriv3,
                                                 ricci_flow_direction(), 0.0, 0.1);
  std::ostringstream a, b;
  write_trajectory_csv(a, traj);
  write_trajectory_csv(b, traj);
  CHECK(a.str() == b.str());  // deterministic
  CHECK(a.str().rfind("t,x0,", 0) == 0);
  CHECK(a.str().find(",norm,step") != std::string::npos);
  // one row per sample plus the header
  const std::string& s = a.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(traj.size()) + 1);
}

TEST_CASE("integrator rejects empty spans and degenerate input") {
  InvariantTensor g = InvariantTensor::euclidean(3);
  CHECK_THROWS(integrate_geometric_flow(g, heisenberg3(), kTriv3,
                                        ricci_flow_direction(), 0.0, 0.0));
  CHECK_THROWS(integrate_bracket_flow(so3_semidirect_r3(), ReductiveSplit{3, 3},
                                      InvariantTensor::metric(diag3(1, 1, 2)),
                                      zero_direction(0.0, 2, 0), 0.0, 1.0));
}
