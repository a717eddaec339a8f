// homflow: validation, soliton certification and flow integration for
// homogeneous geometric structures given by structure constants.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "homflow/curvature.hpp"
#include "homflow/flow_engine.hpp"
#include "homflow/lie_structures.hpp"
#include "homflow/problem_io.hpp"
#include "homflow/soliton_lab.hpp"
#include "homflow/tensor_calculus.hpp"

namespace fs = std::filesystem;
using namespace homflow;

namespace {

// exit codes: 0 success / positive verdict, 1 validation failure,
// 2 I/O or parse error, 3 negative soliton verdict
constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kIoError = 2;
constexpr int kNegativeVerdict = 3;

struct GlobalOptions {
  double tol = 1e-8;
  double max_step = 0.0;
  unsigned long seed = 0;  // reserved for randomized verification passes
  std::string output_dir = ".";
  std::string batch_dir;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

std::string stem_of(const std::string& path) {
  if (path.rfind("preset:", 0) == 0) return path.substr(7);
  return fs::path(path).stem().string();
}

int run_validate(const std::string& input, const GlobalOptions& glob,
                 std::ostream& os) {
  Timer timer;
  ProblemFile pf = load_problem(input);
  ProblemData data = realize(pf);

  const double jres = jacobi_residual(data.mu);
  AdmissibilityReport rep =
      check_admissibility(data.mu, data.split, data.gamma, glob.tol);
  const double adk = adK_invariance_residual(data.mu, data.split, data.gamma);

  const bool jacobi_ok = jres < glob.tol;
  os << "problem: " << input << "\n";
  os << "jacobi residual: " << jres << (jacobi_ok ? "  [ok]" : "  [FAIL]") << "\n";
  os << "condition (i)   mu(k,k) in k, mu(k,p) in p: "
     << (rep.cond_i ? "pass" : "FAIL") << "  residual " << rep.res_i << "\n";
  os << "condition (ii)  closedness of K in G: not decidable numerically ("
     << rep.cond_ii_note << ")\n";
  os << "condition (iii) trivial kernel of Z -> mu(Z,.)|p: "
     << (rep.cond_iii ? "pass" : "FAIL") << "  sigma_min " << rep.res_iii << "\n";
  os << "condition (iv)  theta(ad k|p) gamma = 0: "
     << (rep.cond_iv ? "pass" : "FAIL") << "  residual " << rep.res_iv << "\n";
  os << "Ad(K)-invariance residual: " << adk << "\n";
  os << "wall time: " << timer.seconds() << " s\n";
  return (jacobi_ok && rep.all_pass()) ? kOk : kValidationFailure;
}

int run_soliton(const std::string& input, const GlobalOptions&, bool d00,
                const std::string& format, std::ostream& os) {
  Timer timer;
  ProblemFile pf = load_problem(input);
  ProblemData data = realize(pf);

  SolitonSolveOptions opts;
  opts.d00 = d00;
  SolitonCertificate cert =
      solve_semi_algebraic(data.mu, data.split, data.gamma, data.dir, opts);

  if (format == "record") {
    os << certificate_record(cert);
  } else {
    const bool einstein = cert.D.norm() < 1e-8;
    if (cert.type == SolitonType::NotASoliton) {
      os << "NOT A SOLITON  residual=" << cert.residual << "\n";
    } else {
      os << (cert.is_algebraic ? "ALGEBRAIC SOLITON " : "SEMI-ALGEBRAIC SOLITON ")
         << to_string(cert.type);
      if (einstein) os << " (Einstein, D=0)";
      char buf[64];
      std::snprintf(buf, sizeof buf, " c'=%g", cert.c_prime);
      os << buf << (cert.c_prime_unique ? "" : " (c' not unique)") << "\n";
    }
    os << "flow constant c = " << cert.flow_constant_c
       << ", residual = " << cert.residual
       << ", algebraic = " << (cert.is_algebraic ? "yes" : "no") << "\n";
    os << "D =\n" << cert.D << "\n";
    os << "A (stabilizer part of D_p) =\n" << cert.A << "\n";
  }
  os << "wall time: " << timer.seconds() << " s\n";
  return cert.type == SolitonType::NotASoliton ? kNegativeVerdict : kOk;
}

int run_flow(const std::string& input, const GlobalOptions& glob,
             const std::string& csv_path, bool verify_equiv, bool detect_fp,
             std::ostream& os) {
  Timer timer;
  ProblemFile pf = load_problem(input);
  ProblemData data = realize(pf);
  if (glob.max_step > 0) data.cfg.max_step = glob.max_step;

  FlowTrajectory traj;
  switch (data.which) {
    case FlowKind::Geometric:
      traj = integrate_geometric_flow(data.gamma, data.mu, data.split, data.dir,
                                      data.t0, data.t1, data.cfg);
      break;
    case FlowKind::Bracket:
      traj = integrate_bracket_flow(data.mu, data.split, data.gamma, data.dir,
                                    data.t0, data.t1, data.cfg);
      break;
    case FlowKind::Normalized:
      traj = normalized_bracket_flow(data.mu, data.split, data.gamma, data.dir,
                                     data.t0, data.t1, data.cfg);
      break;
  }

  fs::create_directories(glob.output_dir);
  const std::string out_csv =
      !csv_path.empty() ? csv_path
                        : (fs::path(glob.output_dir) / (stem_of(input) + "_trajectory.csv"))
                              .string();
  write_trajectory_csv(out_csv, traj);

  os << "problem: " << input << "\n";
  os << "samples: " << traj.size() << "  accepted: " << traj.stats.accepted
     << "  rejected: " << traj.stats.rejected << "\n";
  os << "halt reason: " << to_string(traj.halt_reason);
  if (!traj.halt_detail.empty()) os << "  (" << traj.halt_detail << ")";
  os << "\nhalt time: " << traj.t_end() << "\n";
  os << "trajectory: " << out_csv << "\n";

  if (traj.halt_reason == HaltReason::NormExceeded) {
    BlowupFit fit = fit_blowup_exponent(traj);
    if (fit.valid)
      os << "blow-up fit: |state| ~ C (T-t)^" << fit.exponent << ", T ~ " << fit.T_est
         << ", C in [" << fit.c_lower << ", " << fit.c_upper << "]\n";
  }

  if (verify_equiv) {
    const double te = data.t0 + std::min(1.0, data.t1 - data.t0);
    FlowTrajectory tg = integrate_coupling(CouplingVariant::TensorSide, data.mu,
                                           data.split, data.gamma, data.dir, data.t0,
                                           te, data.cfg);
    FlowTrajectory tm = integrate_coupling(CouplingVariant::BracketSide, data.mu,
                                           data.split, data.gamma, data.dir, data.t0,
                                           te, data.cfg);
    EquivalenceResiduals res =
        verify_equivalence(tg, tm, tm, data.mu, data.split, data.gamma);
    os << "equivalence over [" << data.t0 << ", " << te << "]:"
       << "  |h(t)*gamma - gamma(t)| <= " << res.tensor_residual
       << "  |hbar(t).mu - mu(t)| <= " << res.bracket_residual << "\n";
  }

  if (detect_fp) {
    if (data.which == FlowKind::Geometric) {
      os << "fixed-point detection applies to bracket flows; ignored\n";
    } else {
      FixedPointReport fp = detect_fixed_point_up_to_scaling(traj, data.split);
      os << "FIXED POINT UP TO SCALING: " << (fp.fixed ? "yes" : "no")
         << "  (max angular deviation " << fp.max_angular_deviation << ")\n";
    }
  }
  os << "wall time: " << timer.seconds() << " s\n";
  return kOk;
}

int run_stabilizer(const std::string& input, std::ostream& os) {
  Timer timer;
  ProblemFile pf = load_problem(input);
  ProblemData data = realize(pf);
  StabilizerDecomposition dec = stabilizer_algebra(data.gamma);
  os << "tensor kind: " << to_string(data.gamma.kind()) << "  p_dim "
     << data.gamma.p_dim() << "\n";
  os << "dim gl(p)_gamma = " << dec.stab_dim() << "\n";
  os << "dim q_gamma     = " << dec.comp_dim() << "\n";
  os << "gl(p) total     = " << data.gamma.p_dim() * data.gamma.p_dim() << "\n";
  if (!dec.complement_invariant)
    os << "note: noncompact stabilizer kind; the Frobenius complement may fail "
          "invariance\n";
  os << "wall time: " << timer.seconds() << " s\n";
  return kOk;
}

int run_classify_a(const std::string& matrix_path, long max_coeff, std::ostream& os) {
  std::ifstream f(matrix_path);
  if (!f) throw ParseError("cannot open matrix file: " + matrix_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_number_text(tok));
    if (!row.empty()) rows.push_back(row);
  }
  if (rows.empty()) throw ParseError("empty matrix file: " + matrix_path);
  Matrix A(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ParseError("ragged matrix file");
    for (size_t j = 0; j < rows[i].size(); ++j) A(i, j) = rows[i][j];
  }
  ADynamicsReport rep = classify_A_dynamics(A, 1e-9, max_coeff);
  os << "verdict: " << to_string(rep.verdict) << "\n";
  os << "frequencies:";
  for (double a : rep.frequencies) os << " " << a;
  os << "\n";
  return kOk;
}

/// Runs `one` over every .json file of the batch directory concurrently,
/// each with an isolated output directory; the worst exit code wins.
int run_batch(const GlobalOptions& glob,
              const std::function<int(const std::string&, const GlobalOptions&,
                                      std::ostream&)>& one) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(glob.batch_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "batch: no .json problems in " << glob.batch_dir << "\n";
    return kIoError;
  }
  std::vector<std::future<std::pair<int, std::string>>> jobs;
  for (const fs::path& file : files) {
    jobs.push_back(std::async(std::launch::async, [&, file]() {
      GlobalOptions local = glob;
      local.output_dir =
          (fs::path(glob.output_dir) / file.stem()).string();
      std::ostringstream os;
      int rc;
      try {
        rc = one(file.string(), local, os);
      } catch (const ParseError& e) {
        os << "error: " << e.what() << "\n";
        rc = kIoError;
      } catch (const std::exception& e) {
        os << "error: " << e.what() << "\n";
        rc = kValidationFailure;
      }
      return std::make_pair(rc, os.str());
    }));
  }
  int worst = kOk;
  for (size_t i = 0; i < jobs.size(); ++i) {
    auto [rc, text] = jobs[i].get();
    std::cout << "=== " << files[i].string() << " (exit " << rc << ")\n" << text;
    worst = std::max(worst, rc);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homogeneous geometric flows, bracket flows and soliton certificates"};
  app.require_subcommand(1);

  GlobalOptions glob;
  app.add_option("--tol", glob.tol, "validation tolerance");
  app.add_option("--max-step", glob.max_step, "integrator step-size cap");
  app.add_option("--seed", glob.seed, "seed for randomized verification passes");
  app.add_option("--output-dir", glob.output_dir, "directory for output files");
  app.add_option("--batch", glob.batch_dir,
                 "run every .json problem of a directory concurrently");

  std::string input, csv_path, format = "text", matrix_path;
  bool d00 = true, verify_equiv = false, detect_fp = false;
  long max_coeff = 1000000;

  CLI::App* validate = app.add_subcommand("validate", "Jacobi and admissibility checks");
  validate->add_option("problem", input, "problem file or preset:<name>");

  CLI::App* soliton = app.add_subcommand("soliton", "solve the soliton equation");
  soliton->add_option("problem", input, "problem file or preset:<name>");
  soliton->add_flag("--d00,!--no-d00", d00,
                    "restrict derivations to the diag(0, D_p) block form");
  soliton->add_option("--format", format, "text|record")
      ->check(CLI::IsMember({"text", "record"}));

  CLI::App* flow = app.add_subcommand("flow", "integrate the configured flow");
  flow->add_option("problem", input, "problem file or preset:<name>");
  flow->add_option("--csv", csv_path, "trajectory CSV path");
  flow->add_flag("--verify-equivalence", verify_equiv,
                 "co-integrate both flows and the coupling, print residuals");
  flow->add_flag("--detect-fixed-point", detect_fp,
                 "report whether the bracket trajectory is a fixed ray");

  CLI::App* stab = app.add_subcommand("stabilizer", "stabilizer/complement dimensions");
  stab->add_option("problem", input, "problem file or preset:<name>");

  CLI::App* classify = app.add_subcommand("classify-A", "periodic/quasi-periodic dichotomy");
  classify->add_option("matrix", matrix_path, "whitespace matrix file");
  classify->add_option("--max-coeff", max_coeff, "integer-relation coefficient bound");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      if (!glob.batch_dir.empty())
        return run_batch(glob, [](const std::string& in, const GlobalOptions& g,
                                  std::ostream& os) { return run_validate(in, g, os); });
      if (input.empty()) throw ParseError("validate: missing problem argument");
      return run_validate(input, glob, std::cout);
    }
    if (soliton->parsed()) {
      if (!glob.batch_dir.empty())
        return run_batch(glob, [&](const std::string& in, const GlobalOptions& g,
                                   std::ostream& os) {
          return run_soliton(in, g, d00, format, os);
        });
      if (input.empty()) throw ParseError("soliton: missing problem argument");
      return run_soliton(input, glob, d00, format, std::cout);
    }
    if (flow->parsed()) {
      if (!glob.batch_dir.empty())
        return run_batch(glob, [&](const std::string& in, const GlobalOptions& g,
                                   std::ostream& os) {
          return run_flow(in, g, "", verify_equiv, detect_fp, os);
        });
      if (input.empty()) throw ParseError("flow: missing problem argument");
      return run_flow(input, glob, csv_path, verify_equiv, detect_fp, std::cout);
    }
    if (stab->parsed()) {
      if (input.empty()) throw ParseError("stabilizer: missing problem argument");
      return run_stabilizer(input, std::cout);
    }
    if (classify->parsed()) {
      if (matrix_path.empty()) throw ParseError("classify-A: missing matrix argument");
      return run_classify_a(matrix_path, max_coeff, std::cout);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  return kOk;
}
