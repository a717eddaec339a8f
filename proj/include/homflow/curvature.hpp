#pragma once

#include <functional>
#include <string>

#include "homflow/lie_structures.hpp"
#include "homflow/tensor_calculus.hpp"

namespace homflow {

struct CurvatureReport {
  Matrix ricci_tensor;    // symmetric bilinear form on p
  Matrix ricci_operator;  // g^{-1} ricci_tensor
  double scalar_curvature = 0.0;
};

/// Ricci curvature of the left-invariant metric determined by (mu, g),
/// trivial isotropy only.  Computed from structure constants in a
/// g-orthonormal basis: moment-map term, Killing-form term and
/// mean-curvature term.
CurvatureReport ricci_leftinvariant(const BracketTensor& mu, const InvariantTensor& g);

/// Independent verification route: Levi-Civita connection coefficients from
/// the Koszul formula on left-invariant fields, full Riemann tensor
/// R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_{mu(X,Y)}, traced to
/// Ricci(X,Y) = trace(Z -> R(Z,X)Y).
CurvatureReport koszul_oracle(const BracketTensor& mu, const InvariantTensor& g);

/// The three pieces of the structure-constant formula in the orthonormal
/// basis, for term-level diagnostics (the mean-curvature piece vanishes on
/// unimodular algebras).
struct RicciTerms {
  Matrix moment;
  Matrix killing;
  Matrix mean_curvature;
};
RicciTerms ricci_structure_terms(const BracketTensor& mu, const InvariantTensor& g);

/// A flow direction: a tensor-valued function of the homogeneous structure
/// together with its scaling degree alpha (q(c gamma) = c^alpha q(gamma),
/// alpha < 1) and the type (r,s) of the tensors it acts on.
struct PreferredDirection {
  std::string name;
  double alpha = 0.0;
  int r = 2, s = 0;
  std::function<Tensor(const BracketTensor&, const ReductiveSplit&,
                       const InvariantTensor&)>
      evaluate;
};

/// q(g) = -2 ric(g), alpha = 0, acting on (2,0) metrics; the operator form
/// of this direction is the Ricci operator.
PreferredDirection ricci_flow_direction();

/// q = 0 with prescribed degree data; useful as a stand-in for directions
/// supplied through the pluggable interface.
PreferredDirection zero_direction(double alpha, int r, int s);

}  // namespace homflow
