#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskdiff/exact_uncond.hpp"
#include "riskdiff/gcomp.hpp"
#include "riskdiff/inference.hpp"
#include "riskdiff/trialdata.hpp"

namespace riskdiff {

struct AnalysisOptions {
  GcompOptions gcomp{};
  std::size_t theta_grid = kDefaultThetaGrid;
  Ordering ordering = Ordering::abs_z;
  // Shared p-value memo for repeated exact tests; optional.
  ExactTestCache* exact_cache = nullptr;
};

/// All ten procedures on one dataset, sharing the stratification and the
/// working-model fits between methods.
class Analysis {
 public:
  Analysis(const TrialDataset& d, std::vector<std::string> covariate_cols,
           AnalysisOptions opts = {});

  /// Throws UsageError for method/covariate combinations that make no sense
  /// (the exact test takes no covariates) and the module errors otherwise.
  RiskDiffInference run(Method method, double alpha);

  WorkingModel& working_model();
  const StratumTable& strata();

 private:
  const TrialDataset& d_;
  std::vector<std::string> cols_;
  AnalysisOptions opts_;
  std::optional<WorkingModel> model_;
  std::optional<StratumTable> strata_;
};

RiskDiffInference analyze(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                          Method method, double alpha, const AnalysisOptions& opts = {});

}  // namespace riskdiff
