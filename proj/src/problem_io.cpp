#include "homflow/problem_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace homflow {

using nlohmann::json;

namespace {

double number_from(const json& v, const char* what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number_text(v.get<std::string>());
  throw ParseError(std::string(what) + ": expected a number or a fraction string");
}

Matrix matrix_from(const json& v, const char* what) {
  if (!v.is_array() || v.empty())
    throw ParseError(std::string(what) + ": expected a matrix (array of rows)");
  const int rows = static_cast<int>(v.size());
  const int cols = static_cast<int>(v[0].size());
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != cols)
      throw ParseError(std::string(what) + ": ragged matrix rows");
    for (int j = 0; j < cols; ++j) M(i, j) = number_from(v[i][j], what);
  }
  return M;
}

json matrix_to(const Matrix& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

double parse_number_text(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      size_t used = 0;
      double v = std::stod(text, &used);
      if (used != text.size()) throw ParseError("trailing characters in number: " + text);
      return v;
    }
    size_t up = 0, uq = 0;
    const std::string ps = text.substr(0, slash), qs = text.substr(slash + 1);
    double p = std::stod(ps, &up);
    double q = std::stod(qs, &uq);
    if (up != ps.size() || uq != qs.size() || q == 0.0)
      throw ParseError("malformed fraction: " + text);
    return p / q;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("malformed number: " + text);
  }
}

ProblemFile parse_problem_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }

  ProblemFile pf;
  try {
    pf.dimension = j.at("dimension").get<int>();
    pf.k_dim = j.value("k_dim", 0);
    if (pf.dimension <= 0 || pf.k_dim < 0 || pf.k_dim >= pf.dimension)
      throw ParseError("dimension/k_dim out of range");

    for (const json& e : j.value("bracket", json::array())) {
      BracketEntry be;
      be.i = e.at("i").get<int>();
      be.j = e.at("j").get<int>();
      be.k = e.at("k").get<int>();
      be.value = number_from(e.at("value"), "bracket entry");
      if (be.i < 1 || be.j < 1 || be.k < 1 || be.i > pf.dimension ||
          be.j > pf.dimension || be.k > pf.dimension)
        throw ParseError("bracket entry index out of range");
      if (be.i >= be.j)
        throw ParseError("bracket entries require i < j (antisymmetric completion is implied)");
      pf.bracket.push_back(be);
    }

    const json& ten = j.at("tensor");
    pf.tensor.kind = ten.at("kind").get<std::string>();
    pf.tensor.preset = ten.value("preset", "");
    if (ten.contains("components"))
      pf.tensor.components = matrix_from(ten["components"], "tensor components");
    if (ten.contains("omega")) pf.tensor.omega = matrix_from(ten["omega"], "omega");
    if (ten.contains("g")) pf.tensor.g = matrix_from(ten["g"], "g");
    if (ten.contains("J")) pf.tensor.J = matrix_from(ten["J"], "J");
    if (ten.contains("signature")) {
      pf.tensor.sig_p = ten["signature"].at(0).get<int>();
      pf.tensor.sig_q = ten["signature"].at(1).get<int>();
    }

    if (j.contains("direction")) {
      const json& dir = j["direction"];
      pf.direction.name = dir.value("name", "ricci");
      pf.direction.alpha = dir.contains("alpha") ? number_from(dir["alpha"], "alpha") : 0.0;
      pf.direction.r = dir.value("r", 2);
      pf.direction.s = dir.value("s", 0);
      if (pf.direction.name != "ricci" && pf.direction.name != "custom")
        throw ParseError("unknown direction: " + pf.direction.name);
      if (pf.direction.alpha >= 1.0)
        throw ParseError("direction alpha must be < 1");
    }

    if (j.contains("flow")) {
      const json& fl = j["flow"];
      const std::string which = fl.value("which", "geometric");
      if (which == "geometric") pf.flow.which = FlowKind::Geometric;
      else if (which == "bracket") pf.flow.which = FlowKind::Bracket;
      else if (which == "normalized") pf.flow.which = FlowKind::Normalized;
      else throw ParseError("unknown flow kind: " + which);
      if (fl.contains("t_span")) {
        pf.flow.t0 = number_from(fl["t_span"].at(0), "t_span");
        pf.flow.t1 = number_from(fl["t_span"].at(1), "t_span");
      }
      pf.flow.rel_tol = fl.contains("rel_tol") ? number_from(fl["rel_tol"], "rel_tol") : 1e-8;
      pf.flow.abs_tol = fl.contains("abs_tol") ? number_from(fl["abs_tol"], "abs_tol") : 1e-10;
      pf.flow.max_step = fl.contains("max_step") ? number_from(fl["max_step"], "max_step") : 0.0;
      pf.flow.stop_norm = fl.contains("stop_norm") ? number_from(fl["stop_norm"], "stop_norm") : 1e6;
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("malformed problem file: ") + e.what());
  }
  return pf;
}

std::string problem_to_text(const ProblemFile& pf) {
  json j;
  j["dimension"] = pf.dimension;
  j["k_dim"] = pf.k_dim;
  json entries = json::array();
  for (const BracketEntry& be : pf.bracket)
    entries.push_back({{"i", be.i}, {"j", be.j}, {"k", be.k}, {"value", be.value}});
  j["bracket"] = entries;

  json ten;
  ten["kind"] = pf.tensor.kind;
  if (!pf.tensor.preset.empty()) ten["preset"] = pf.tensor.preset;
  if (pf.tensor.components) ten["components"] = matrix_to(*pf.tensor.components);
  if (pf.tensor.omega) ten["omega"] = matrix_to(*pf.tensor.omega);
  if (pf.tensor.g) ten["g"] = matrix_to(*pf.tensor.g);
  if (pf.tensor.J) ten["J"] = matrix_to(*pf.tensor.J);
  if (pf.tensor.kind == "pseudo_metric")
    ten["signature"] = {pf.tensor.sig_p, pf.tensor.sig_q};
  j["tensor"] = ten;

  j["direction"] = {{"name", pf.direction.name},
                    {"alpha", pf.direction.alpha},
                    {"r", pf.direction.r},
                    {"s", pf.direction.s}};
  const char* which = pf.flow.which == FlowKind::Geometric    ? "geometric"
                      : pf.flow.which == FlowKind::Bracket    ? "bracket"
                                                              : "normalized";
  j["flow"] = {{"which", which},
               {"t_span", {pf.flow.t0, pf.flow.t1}},
               {"rel_tol", pf.flow.rel_tol},
               {"abs_tol", pf.flow.abs_tol},
               {"max_step", pf.flow.max_step},
               {"stop_norm", pf.flow.stop_norm}};
  return j.dump(2) + "\n";
}

namespace {

ProblemFile preset_heisenberg3() {
  ProblemFile pf;
  pf.dimension = 3;
  pf.k_dim = 0;
  pf.bracket = {{1, 2, 3, 1.0}};
  pf.tensor.kind = "metric";
  pf.tensor.preset = "euclidean";
  pf.direction.name = "ricci";
  pf.flow.which = FlowKind::Bracket;
  pf.flow.t0 = 0.0;
  pf.flow.t1 = 10.0;
  return pf;
}

ProblemFile preset_su2() {
  ProblemFile pf;
  pf.dimension = 3;
  pf.k_dim = 0;
  pf.bracket = {{1, 2, 3, 1.0}, {2, 3, 1, 1.0}, {1, 3, 2, -1.0}};
  pf.tensor.kind = "metric";
  pf.tensor.preset = "euclidean";
  pf.direction.name = "ricci";
  pf.flow.which = FlowKind::Geometric;
  pf.flow.t0 = 0.0;
  pf.flow.t1 = 2.0;
  return pf;
}

ProblemFile preset_heisenberg_plus_r() {
  ProblemFile pf;
  pf.dimension = 4;
  pf.k_dim = 0;
  pf.bracket = {{1, 2, 3, 1.0}};
  pf.tensor.kind = "metric";
  pf.tensor.preset = "euclidean";
  pf.direction.name = "ricci";
  pf.flow.which = FlowKind::Normalized;
  pf.flow.t0 = 0.0;
  pf.flow.t1 = 50.0;
  return pf;
}

ProblemFile preset_so3_semidirect_r3() {
  ProblemFile pf;
  pf.dimension = 6;
  pf.k_dim = 3;
  pf.bracket = {
      {1, 2, 3, 1.0}, {2, 3, 1, 1.0}, {1, 3, 2, -1.0},  // so(3) on k
      {1, 5, 6, 1.0}, {1, 6, 5, -1.0},                  // ad e1 on p
      {2, 6, 4, 1.0}, {2, 4, 6, -1.0},                  // ad e2 on p
      {3, 4, 5, 1.0}, {3, 5, 4, -1.0},                  // ad e3 on p
  };
  pf.tensor.kind = "metric";
  pf.tensor.preset = "euclidean";
  pf.direction.name = "custom";
  pf.direction.alpha = 0.0;
  pf.direction.r = 2;
  pf.direction.s = 0;
  pf.flow.which = FlowKind::Geometric;
  pf.flow.t0 = 0.0;
  pf.flow.t1 = 1.0;
  return pf;
}

ProblemFile preset_standard_g2_form() {
  ProblemFile pf;
  pf.dimension = 7;
  pf.k_dim = 0;
  pf.tensor.kind = "three_form";
  pf.tensor.preset = "standard_g2";
  pf.direction.name = "custom";
  pf.direction.alpha = 0.5;
  pf.direction.r = 3;
  pf.direction.s = 0;
  pf.flow.which = FlowKind::Geometric;
  pf.flow.t0 = 0.0;
  pf.flow.t1 = 1.0;
  return pf;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"heisenberg3", "su2", "heisenberg_plus_r", "so3_semidirect_r3",
          "standard_g2_form"};
}

ProblemFile preset_problem(const std::string& name) {
  if (name == "heisenberg3") return preset_heisenberg3();
  if (name == "su2") return preset_su2();
  if (name == "heisenberg_plus_r") return preset_heisenberg_plus_r();
  if (name == "so3_semidirect_r3") return preset_so3_semidirect_r3();
  if (name == "standard_g2_form") return preset_standard_g2_form();
  throw ParseError("unknown preset: " + name);
}

ProblemFile load_problem(const std::string& path_or_preset) {
  if (path_or_preset.rfind("preset:", 0) == 0)
    return preset_problem(path_or_preset.substr(7));
  std::ifstream f(path_or_preset);
  if (!f) throw ParseError("cannot open problem file: " + path_or_preset);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_problem_text(ss.str());
}

ProblemData realize(const ProblemFile& pf) {
  const int d = pf.dimension;
  BracketTensor mu(d);
  for (const BracketEntry& be : pf.bracket)
    mu.set_entry(be.k - 1, be.i - 1, be.j - 1, be.value);
  ReductiveSplit split{pf.k_dim, d - pf.k_dim};
  const int p = split.p_dim;

  auto build_tensor = [&]() -> InvariantTensor {
    const std::string& kind = pf.tensor.kind;
    if (!pf.tensor.preset.empty()) {
      const std::string& pr = pf.tensor.preset;
      if (pr == "euclidean") {
        if (kind != "metric") throw ParseError("preset euclidean requires kind metric");
        return InvariantTensor::euclidean(p);
      }
      if (pr == "standard_symplectic") {
        if (kind != "symplectic")
          throw ParseError("preset standard_symplectic requires kind symplectic");
        if (p % 2) throw ParseError("standard_symplectic requires even p_dim");
        return InvariantTensor::standard_symplectic(p);
      }
      if (pr == "standard_g2") {
        if (kind != "three_form")
          throw ParseError("preset standard_g2 requires kind three_form");
        if (p != 7) throw ParseError("standard_g2 requires p_dim = 7");
        return InvariantTensor::standard_g2();
      }
      throw ParseError("unknown tensor preset: " + pr);
    }
    if (kind == "metric") {
      if (!pf.tensor.components) throw ParseError("metric: components required");
      if (pf.tensor.components->rows() != p) throw ParseError("metric: size mismatch");
      return InvariantTensor::metric(*pf.tensor.components);
    }
    if (kind == "pseudo_metric") {
      if (!pf.tensor.components) throw ParseError("pseudo_metric: components required");
      return InvariantTensor::pseudo_metric(*pf.tensor.components, pf.tensor.sig_p,
                                            pf.tensor.sig_q);
    }
    if (kind == "symplectic") {
      if (!pf.tensor.components) throw ParseError("symplectic: components required");
      return InvariantTensor::symplectic(*pf.tensor.components);
    }
    if (kind == "hermitian_triple") {
      if (!pf.tensor.omega || !pf.tensor.g || !pf.tensor.J)
        throw ParseError("hermitian_triple: omega, g and J required");
      return InvariantTensor::hermitian_triple(*pf.tensor.omega, *pf.tensor.g,
                                               *pf.tensor.J);
    }
    throw ParseError("unknown tensor kind: " + kind);
  };

  InvariantTensor gamma = build_tensor();
  PreferredDirection dir =
      pf.direction.name == "ricci"
          ? ricci_flow_direction()
          : zero_direction(pf.direction.alpha, pf.direction.r, pf.direction.s);

  IntegratorConfig cfg;
  cfg.rel_tol = pf.flow.rel_tol;
  cfg.abs_tol = pf.flow.abs_tol;
  cfg.max_step = pf.flow.max_step;
  cfg.stop_norm = pf.flow.stop_norm;

  return ProblemData{std::move(mu), split, std::move(gamma), std::move(dir),
                     pf.flow.which, pf.flow.t0, pf.flow.t1, cfg};
}

}  // namespace homflow
