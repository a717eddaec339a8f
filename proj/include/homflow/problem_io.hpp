#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "homflow/curvature.hpp"
#include "homflow/flow_engine.hpp"
#include "homflow/lie_structures.hpp"
#include "homflow/tensor_calculus.hpp"

namespace homflow {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sparse bracket entry: mu(e_i, e_j) has e_k-coefficient `value`, indices
/// 1-based with i < j; the antisymmetric completion is implied.
struct BracketEntry {
  int i = 0, j = 0, k = 0;
  double value = 0.0;
};

enum class FlowKind { Geometric, Bracket, Normalized };

struct TensorSpec {
  std::string kind;                      // metric, pseudo_metric, symplectic, ...
  std::string preset;                    // euclidean, standard_symplectic, standard_g2
  std::optional<Matrix> components;      // single-matrix kinds
  std::optional<Matrix> omega, g, J;     // hermitian triple
  int sig_p = 0, sig_q = 0;              // pseudo metric signature
};

struct DirectionSpec {
  std::string name = "ricci";  // ricci | custom
  double alpha = 0.0;
  int r = 2, s = 0;
};

struct FlowSpec {
  FlowKind which = FlowKind::Geometric;
  double t0 = 0.0, t1 = 1.0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0;
  double stop_norm = 1e6;
};

struct ProblemFile {
  int dimension = 0;
  int k_dim = 0;
  std::vector<BracketEntry> bracket;
  TensorSpec tensor;
  DirectionSpec direction;
  FlowSpec flow;
};

/// Accepts a JSON path or "preset:<name>".
ProblemFile load_problem(const std::string& path_or_preset);
ProblemFile parse_problem_text(const std::string& text);
std::string problem_to_text(const ProblemFile& pf);

std::vector<std::string> preset_names();
ProblemFile preset_problem(const std::string& name);

/// Numbers are accepted as JSON numbers or exact fraction strings "p/q".
double parse_number_text(const std::string& text);

/// Realized problem: dense bracket, split, tensor, direction and solver
/// configuration.
struct ProblemData {
  BracketTensor mu;
  ReductiveSplit split;
  InvariantTensor gamma;
  PreferredDirection dir;
  FlowKind which = FlowKind::Geometric;
  double t0 = 0.0, t1 = 1.0;
  IntegratorConfig cfg;
};

ProblemData realize(const ProblemFile& pf);

}  // namespace homflow
