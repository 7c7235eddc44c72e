// riskdiff: risk-difference analysis of two-arm binary-endpoint trials and
// the Monte Carlo study driver.
//
// Exit codes: 0 success, 1 computation error, 2 usage or config error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskdiff/analysis.hpp"
#include "riskdiff/config.hpp"
#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"
#include "riskdiff/simgen.hpp"
#include "riskdiff/simharness.hpp"
#include "riskdiff/version.hpp"

namespace {

using namespace riskdiff;

struct AnalyzeArgs {
  std::string input;
  std::string outcome = "y";
  std::string arm = "arm";
  std::vector<std::string> covariates;
  std::string method;
  double alpha = 0.05;
  std::size_t boot_b = kDefaultBootstrapB;
  std::uint64_t seed = 1;
  std::string format = "json";
  std::string zhang_variance = "ye";
  std::string ordering = "z";
  std::size_t theta_grid = kDefaultThetaGrid;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::size_t workers = 0;  // 0: take the config value
  bool resume = false;
  bool quiet = false;
};

struct SolveArgs {
  double p0 = 0.20;
  std::string delta = "0";
  std::string beta_cov = "0";
  std::string format = "text";
};

int run_analyze(const AnalyzeArgs& a) {
  const auto method = parse_method(a.method);
  if (!method) throw UsageError("unknown method '" + a.method + "'");
  if (*method == Method::suissa && !a.covariates.empty())
    throw UsageError("method suissa accepts no covariates");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (a.boot_b < 2) throw UsageError("--boot-b must be at least 2");

  AnalysisOptions opts;
  opts.gcomp.boot_b = a.boot_b;
  opts.gcomp.seed = a.seed;
  opts.theta_grid = a.theta_grid;
  opts.ordering = a.ordering == "z" ? Ordering::abs_z : Ordering::delta_one_sided;
  if (a.zhang_variance == "ge") opts.gcomp.zhang_variance = ZhangVariance::ge;
  if (a.zhang_variance == "liu") opts.gcomp.zhang_variance = ZhangVariance::liu;

  const TrialDataset d = load_csv(a.input, a.outcome, a.arm, a.covariates);
  const RiskDiffInference r = analyze(d, a.covariates, *method, a.alpha, opts);
  if (a.format == "csv") {
    std::cout << csv_header() << '\n' << to_csv_row(r) << '\n';
  } else {
    std::cout << to_json(r).dump(2) << '\n';
  }
  return 0;
}

int run_simulate(const SimulateArgs& a) {
  GridRun run = load_config(a.config);
  if (a.workers > 0) run.workers = a.workers;
  const std::size_t total = run.grid.size();
  std::size_t done = 0;
  run_grid(run, a.out, a.resume, [&](const ScenarioSpec& s, bool reused) {
    ++done;
    if (!a.quiet)
      std::cerr << "[" << done << "/" << total << "] " << s.id << (reused ? " (kept)" : "")
                << '\n';
  });
  if (!a.quiet) std::cerr << "wrote " << (std::filesystem::path(a.out) / "results.csv") << '\n';
  return 0;
}

int run_solve(const SolveArgs& a) {
  ScenarioParams p;
  p.p0 = a.p0;
  try {
    p.delta = parse_real(a.delta);
    p.beta_cov = parse_real(a.beta_cov);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  if (!(p.p0 > 0.0 && p.p0 < 1.0)) throw UsageError("--p0 must lie in (0, 1)");
  if (!(p.p0 + p.delta > 0.0 && p.p0 + p.delta < 1.0))
    throw UsageError("--p0 + --delta must lie in (0, 1)");

  const SolvedCoefficients c = solve_coefficients(p);
  const auto cells = cell_probabilities(p, c);
  if (a.format == "json") {
    nlohmann::json j;
    j["p0"] = p.p0;
    j["delta"] = p.delta;
    j["beta_cov"] = p.beta_cov;
    j["beta0"] = c.beta0;
    j["betaA"] = c.betaA;
    j["achieved_p0"] = c.achieved_p0;
    j["achieved_delta"] = c.achieved_delta;
    for (int arm = 0; arm < 2; ++arm)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
          j["cells"].push_back({{"arm", arm}, {"x1", x1}, {"x2", x2}, {"p", cells[arm][x1][x2]}});
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::printf("beta0 = %.6f\nbetaA = %.6f\n", c.beta0, c.betaA);
  std::printf("achieved_p0 = %.12f\nachieved_delta = %.12f\n", c.achieved_p0, c.achieved_delta);
  std::printf("arm,x1,x2,p\n");
  for (int arm = 0; arm < 2; ++arm)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) std::printf("%d,%d,%d,%.6f\n", arm, x1, x2, cells[arm][x1][x2]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-difference inference for two-arm trials with a binary endpoint"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("riskdiff ") + kVersion + " (config schema " +
                           std::to_string(kConfigSchemaVersion) + ")");

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "Analyze one dataset with one method");
  analyze_cmd->add_option("--input", aa.input, "CSV file with a header row")
      ->required()
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--outcome", aa.outcome, "Binary outcome column")->capture_default_str();
  analyze_cmd->add_option("--arm", aa.arm, "Treatment indicator column")->capture_default_str();
  analyze_cmd->add_option("--covariates", aa.covariates, "Baseline covariate columns")
      ->delimiter(',');
  analyze_cmd
      ->add_option("--method", aa.method,
                   "suissa, mh-test, mh-sato, mh-mgr, ge, liu, ye, boot, zhang, firth")
      ->required();
  analyze_cmd->add_option("--alpha", aa.alpha, "Two-sided level")->capture_default_str();
  analyze_cmd->add_option("--boot-b", aa.boot_b, "Bootstrap replicates")->capture_default_str();
  analyze_cmd->add_option("--seed", aa.seed, "Bootstrap seed")->capture_default_str();
  analyze_cmd->add_option("--format", aa.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  analyze_cmd->add_option("--zhang-variance", aa.zhang_variance, "Variance plugged into zhang")
      ->check(CLI::IsMember({"ge", "liu", "ye"}))
      ->capture_default_str();
  analyze_cmd->add_option("--ordering", aa.ordering, "suissa outcome ordering: z or delta")
      ->check(CLI::IsMember({"z", "delta"}))
      ->capture_default_str();
  analyze_cmd->add_option("--theta-grid", aa.theta_grid, "suissa nuisance grid size")
      ->check(CLI::Range(100, 1000000))
      ->capture_default_str();

  SimulateArgs sa;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a simulation grid from a config file");
  simulate_cmd->add_option("--config", sa.config, "Config file")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--out", sa.out, "Output directory")->required();
  simulate_cmd->add_option("--workers", sa.workers, "Worker threads (overrides the config)");
  simulate_cmd->add_flag("--resume", sa.resume, "Keep completed scenarios from an earlier run");
  simulate_cmd->add_flag("--quiet", sa.quiet, "No progress on stderr");

  SolveArgs so;
  auto* solve_cmd = app.add_subcommand("solve-dgp", "Solve the outcome-model coefficients");
  solve_cmd->add_option("--p0", so.p0, "Marginal control response probability")
      ->capture_default_str();
  solve_cmd->add_option("--delta", so.delta, "Marginal risk difference")->required();
  solve_cmd->add_option("--beta-cov", so.beta_cov, "Covariate log odds ratio; logX allowed")
      ->required();
  solve_cmd->add_option("--format", so.format, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*analyze_cmd) return run_analyze(aa);
    if (*simulate_cmd) return run_simulate(sa);
    if (*solve_cmd) return run_solve(so);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
