#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskdiff/inference.hpp"
#include "riskdiff/simgen.hpp"

namespace riskdiff {

struct ScenarioSpec {
  std::string id;
  ScenarioParams params;
};

/// e.g. "n30_d0.15_b1.0986"
std::string scenario_id(const ScenarioParams& p);
ScenarioSpec make_scenario(long n, double delta, double beta_cov, double p0 = 0.20);

/// N in {30..150} x delta in {0, 0.15, 0.30} x beta in {log 1, log 1.5, log 3}.
std::vector<ScenarioSpec> paper_grid();

struct HarnessOptions {
  double alpha = 0.05;
  std::size_t boot_b = 1000;
  std::size_t theta_grid = 1000;
};

/// One method applied to one replicate. `usable` is false when the method
/// raised; the error text is kept in `failure`.
struct MethodRecord {
  Method method = Method::ge;
  bool usable = false;
  std::string failure;
  std::optional<double> estimate;
  std::optional<Interval> ci;
  double p_value = 1.0;
  bool reject = false;
  InferenceFlags flags;
};

struct RepOutcome {
  std::string scenario_id;
  std::size_t replicate = 0;
  std::vector<MethodRecord> records;
  bool separated = false;
  bool converged = true;
  bool mh_degenerate = false;
};

struct MethodOC {
  Method method = Method::ge;
  double rejection_rate = 0.0;
  double bias = 0.0;      // NaN for test-only methods
  double rmse = 0.0;      // NaN for test-only methods
  double coverage = 0.0;  // NaN for test-only methods
  double mc_se = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

struct OperatingCharacteristics {
  std::size_t replicates = 0;
  std::vector<MethodOC> methods;
  double separation_rate = 0.0;
  double nonconvergence_rate = 0.0;
  double mh_failure_rate = 0.0;

  const MethodOC& at(Method m) const;
};

/// Applies every method to one dataset. Never throws for method failures.
RepOutcome run_replicate(const ScenarioSpec& s, const SolvedCoefficients& c,
                         std::span<const Method> methods, std::size_t r, std::uint64_t base_seed,
                         const HarnessOptions& opts);

/// Reduction in replicate order. Throws AggregationError naming the first
/// method without a usable replicate.
OperatingCharacteristics aggregate(std::span<const RepOutcome> outcomes, double truth,
                                   std::span<const Method> methods);

struct ScenarioResult {
  ScenarioSpec spec;
  OperatingCharacteristics oc;
  std::vector<RepOutcome> outcomes;  // kept only when requested
};

/// R replicates of one scenario. Replicate r draws from a stream keyed by
/// (base_seed, scenario id, r); the summary does not depend on `workers`.
/// A method with no usable replicates gets NaN summaries instead of an
/// error.
ScenarioResult run_scenario(const ScenarioSpec& s, std::span<const Method> methods,
                            std::size_t R, std::uint64_t base_seed, std::size_t workers,
                            const HarnessOptions& opts = {}, bool keep_outcomes = false);

std::string oc_csv_header();
std::vector<std::string> oc_csv_rows(const ScenarioSpec& s, const OperatingCharacteristics& oc);

struct GridRun {
  std::vector<ScenarioSpec> grid;
  std::vector<Method> methods;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  HarnessOptions options;
};

/// Runs the grid, writing `results.csv` (rows in grid order, rewritten
/// atomically after each scenario) and `manifest.json` under `out_dir`.
/// With `resume`, scenarios whose rows are already complete in an existing
/// results file are kept verbatim. `progress` is called after each scenario.
/// Returns the CSV rows of the whole grid.
std::vector<std::string> run_grid(
    const GridRun& run, const std::filesystem::path& out_dir, bool resume,
    const std::function<void(const ScenarioSpec&, bool reused)>& progress = {});

}  // namespace riskdiff
