// Command-line front end: benchmark runs, convergence studies and the verification suite.
//
// Exit codes: 0 success, 1 verification failure, 2 bad input or configuration,
// 3 singular system, 4 numerical failure.

#include "tdcshell/assembly.hpp"
#include "tdcshell/bench_suite.hpp"
#include "tdcshell/run_config.hpp"
#include "tdcshell/testing/verify_suite.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace tdcshell;

namespace {

constexpr int kExitVerify = 1;
constexpr int kExitInput = 2;
constexpr int kExitSingular = 3;
constexpr int kExitNumerical = 4;

struct RunFlags {
  std::string config;
  std::optional<std::string> case_name, study, patch, out, ps, ns;
  std::optional<int> p, n, jobs, quadrature, sample_grid;
  bool residual = false, oracle = false, timing = false, dump_system = false;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Command-line flags are appended as a trailing [run] section, so they override the file.
RunConfig build_config(const RunFlags& f) {
  std::string text = f.config.empty() ? "" : read_file(f.config);
  std::ostringstream extra;
  extra << "\n[run]\n";
  if (f.case_name) extra << "case = " << *f.case_name << "\n";
  if (f.study) extra << "case = " << *f.study << "\nstudy = true\n";
  if (f.patch) extra << "patch = " << *f.patch << "\n";
  if (f.out) extra << "out = " << *f.out << "\n";
  if (f.p) extra << "p = " << *f.p << "\n";
  if (f.n) extra << "n = " << *f.n << "\n";
  if (f.ps) extra << "ps = " << *f.ps << "\n";
  if (f.ns) extra << "ns = " << *f.ns << "\n";
  if (f.jobs) extra << "jobs = " << *f.jobs << "\n";
  if (f.quadrature) extra << "quadrature = " << *f.quadrature << "\n";
  if (f.sample_grid) extra << "sample_grid = " << *f.sample_grid << "\n";
  if (f.residual) extra << "residual = true\n";
  if (f.oracle) extra << "oracle = true\n";
  if (f.timing) extra << "timing = true\n";
  return parse_config(text + extra.str());
}

int exit_code_for(FailureKind k) {
  switch (k) {
    case FailureKind::None: return 0;
    case FailureKind::Input: return kExitInput;
    case FailureKind::Singular: return kExitSingular;
    case FailureKind::Numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

std::string slope_summary(const ConvergenceReport& rep, const std::vector<int>& ps) {
  std::string s = "p,slope_err_u,slope_err_n,slope_err_m,slope_err_q,slope_residual\n";
  for (int p : ps) {
    s += std::to_string(p);
    for (double ReportRow::*m : {&ReportRow::err_u, &ReportRow::err_n, &ReportRow::err_m, &ReportRow::err_q, &ReportRow::residual})
      s += "," + format_double(rep.slope(p, m));
    s += "\n";
  }
  return s;
}

int run_command(const RunFlags& flags) {
  const RunConfig cfg = build_config(flags);
  const CaseSpec spec = resolve_spec(cfg);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  if (fs::exists(out / "report.csv"))
    throw ConfigError("'" + (out / "report.csv").string() + "' already exists; pick a fresh --out directory");
  write_file(out / "config.txt", config_text(cfg));

  RunOptions opt;
  opt.residual = cfg.residual;
  opt.timing = cfg.timing;
  opt.assembly.quadrature_points = cfg.quadrature;

  ConvergenceReport rep;
  std::optional<RunOutput> single;
  if (cfg.study) {
    rep = convergence_study(spec, cfg.ps, cfg.ns, cfg.jobs, opt);
  } else {
    try {
      single = run_case(spec, cfg.p, cfg.n, opt);
      rep.rows.push_back(single->row);
    } catch (const SingularSystemError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitSingular;
    } catch (const NumericalError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumerical;
    }
  }

  const std::string csv = csv_report(rep);
  write_file(out / "report.csv", csv);
  std::cout << csv;
  if (cfg.study) write_file(out / "slopes.csv", slope_summary(rep, cfg.ps));

  int code = 0;
  for (const ReportRow& r : rep.rows)
    if (r.failed) {
      std::cerr << "cell p=" << r.p << " n=" << r.n << " failed: " << r.error << "\n";
      code = std::max(code, exit_code_for(r.failure));
    }

  if (single && cfg.sample_grid > 0) {
    const std::string name = spec.name + "_p" + std::to_string(cfg.p) + "_n" + std::to_string(cfg.n) + "_samples.txt";
    write_file(out / name, field_samples(single->bench, single->solution.u, cfg.sample_grid));
  }
  if (single && flags.dump_system) {
    const BenchmarkCase& c = single->bench;
    const SaddleSystem sys = assemble(c.surface, c.material, c.loads, c.bcs, opt.assembly, c.pins);
    write_matrix_market((out / "K.mtx").string(), sys.K);
    write_matrix_market((out / "B.mtx").string(), sys.B);
  }
  if (cfg.oracle) {
    std::string text = "p,n,max_relative_mismatch\n";
    double worst = 0.0;
    const std::vector<int> ps = cfg.study ? cfg.ps : std::vector<int>{cfg.p};
    const std::vector<int> ns = cfg.study ? cfg.ns : std::vector<int>{cfg.n};
    for (int p : ps)
      for (int n : ns) {
        const BenchmarkCase c = make_case(spec, p, n);
        const double m = testing::max_oracle_mismatch(c.surface, c.material, cfg.quadrature);
        worst = std::max(worst, m);
        text += std::to_string(p) + "," + std::to_string(n) + "," + format_double(m) + "\n";
      }
    write_file(out / "oracle.csv", text);
    std::cerr << "oracle: worst element mismatch " << format_double(worst) << "\n";
    if (!(worst <= 1e-9)) code = std::max(code, kExitNumerical);
  }
  return code;
}

int verify_command(std::uint64_t seed, int trials, const std::string& fault) {
  testing::VerifyOptions opt;
  opt.seed = seed;
  opt.fuzz_trials = trials;
  if (fault == "weingarten-sign") {
    opt.flip_weingarten = true;
  } else if (!fault.empty()) {
    throw ConfigError("unknown fault '" + fault + "' (known: weingarten-sign)");
  }
  const auto results = testing::run_verify_suite(opt);
  std::cout << testing::format_results(results);
  const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  std::cout << (ok ? "all checks passed" : "verification FAILED") << " (seed " << seed << ")\n";
  return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kirchhoff-Love shell solver on NURBS patches"};
  app.require_subcommand(1);

  RunFlags rf;
  CLI::App* run = app.add_subcommand("run", "Solve one benchmark cell or a convergence study");
  run->add_option("--config", rf.config, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--case", rf.case_name, "flat_shell, scordelis_lo, pinched_cylinder, flower or custom");
  run->add_option("--study", rf.study, "run the p x n study for this case");
  run->add_option("--patch", rf.patch, "patch file replacing the case geometry");
  run->add_option("--p", rf.p, "polynomial degree");
  run->add_option("--n", rf.n, "elements per side");
  run->add_option("--ps", rf.ps, "study degrees, comma separated");
  run->add_option("--ns", rf.ns, "study meshes, comma separated");
  run->add_option("--out", rf.out, "output directory");
  run->add_option("--jobs", rf.jobs, "concurrent study cells");
  run->add_option("--quadrature", rf.quadrature, "Gauss points per direction (0 = degree + 1)");
  run->add_option("--sample-grid", rf.sample_grid, "write field samples on a (g+1)^2 grid");
  run->add_flag("--residual", rf.residual, "compute the equilibrium residual (degree >= 4)");
  run->add_flag("--oracle", rf.oracle, "compare element matrices with the curvilinear formulation");
  run->add_flag("--timing", rf.timing, "fill the runtime_s column");
  run->add_flag("--dump-system", rf.dump_system, "write K.mtx and B.mtx (single runs)");

  std::uint64_t seed = testing::VerifyOptions{}.seed;
  int trials = testing::VerifyOptions{}.fuzz_trials;
  std::string fault;
  CLI::App* verify = app.add_subcommand("verify", "Operator property checks and the stiffness oracle comparison");
  verify->add_option("--seed", seed, "fuzz seed");
  verify->add_option("--trials", trials, "random patches for the oracle comparison")->check(CLI::PositiveNumber);
  verify->add_option("--inject-fault", fault, "test hook: weingarten-sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (run->parsed()) return run_command(rf);
    return verify_command(seed, trials, fault);
  } catch (const SingularSystemError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSingular;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
