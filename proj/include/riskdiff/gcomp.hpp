#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskdiff/glm_logistic.hpp"
#include "riskdiff/inference.hpp"
#include "riskdiff/trialdata.hpp"

namespace riskdiff {

/// Predictions for every subject with treatment set to 1 and to 0.
struct CounterfactualPredictions {
  std::vector<double> p1;
  std::vector<double> p0;
  double pi1 = 0.0;
  double pi0 = 0.0;
  double delta = 0.0;
};

CounterfactualPredictions standardize(const LogisticFit& fit, const DesignMatrix& x);

/// d delta / d beta, averaged over subjects.
std::vector<double> delta_gradient(const DesignMatrix& x, const CounterfactualPredictions& cf);

/// Delta-method variance with the model-based covariance (conditional on the
/// observed covariates).
double var_ge(const LogisticFit& fit, const DesignMatrix& x, const CounterfactualPredictions& cf);

/// HC3 delta-method term plus the sample variance of the per-subject
/// counterfactual differences divided by N.
double var_liu(const LogisticFit& fit, const DesignMatrix& x, std::span<const int> y,
               const CounterfactualPredictions& cf);

/// The covariate term of var_liu on its own.
double covariate_variance_term(const CounterfactualPredictions& cf);

/// Unconditional plug-in variance built from arm-wise residual variances and
/// prediction covariances.
double var_ye(const LogisticFit& fit, const DesignMatrix& x, std::span<const int> y,
              std::span<const int> arm, const CounterfactualPredictions& cf);

struct BootstrapResult {
  double variance = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;
};

/// Delta for replicate b, or nullopt if the replicate is unusable.
using ReplicateFn = std::function<std::optional<double>(std::size_t b)>;

/// Sample variance of the usable replicate deltas. Replicates are assigned
/// to workers by index and reduced in index order, so the result does not
/// depend on `workers`. Throws BootstrapFailure with fewer than
/// max(B/2, 2) usable replicates.
BootstrapResult bootstrap_variance(std::size_t B, const ReplicateFn& replicate,
                                   std::size_t workers = 1);

inline constexpr std::size_t kDefaultBootstrapB = 1000;

/// Nonparametric bootstrap of the ML standardization estimator. Replicate b
/// draws its resample from CounterRng(seed, b).
BootstrapResult var_boot(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                         std::size_t B, std::uint64_t seed, std::size_t workers = 1);

/// Same, starting from an already built design.
BootstrapResult var_boot(const DesignMatrix& x, std::span<const int> y, std::size_t B,
                         std::uint64_t seed, std::size_t workers = 1);

struct ZhangScore {
  double chi2 = 0.0;
  double p_value = 1.0;
};

ZhangScore zhang_score(double delta_hat, double var_hat, std::size_t n, double delta0 = 0.0);

/// Closed-form inversion of zhang_score; throws DegenerateInversionError
/// when z^2 >= n.
Interval zhang_ci(double delta_hat, double var_hat, std::size_t n, double alpha,
                  bool* truncated = nullptr);

enum class ZhangVariance { ge, liu, ye };

struct GcompOptions {
  std::size_t boot_b = kDefaultBootstrapB;
  std::uint64_t seed = 1;
  std::size_t boot_workers = 1;
  ZhangVariance zhang_variance = ZhangVariance::ye;
  FitOptions ml{};
  FitOptions firth{.max_iter = 100};
};

/// Design plus lazily computed ML and Firth fits, shared by the g-methods
/// applied to one dataset.
class WorkingModel {
 public:
  WorkingModel(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
               const GcompOptions& opts = {});

  const DesignMatrix& design() const noexcept { return x_; }
  std::span<const int> y() const noexcept { return y_; }
  std::span<const int> arm() const noexcept { return arm_; }
  const LogisticFit& ml();
  const CounterfactualPredictions& ml_predictions();
  const LogisticFit& firth();

 private:
  DesignMatrix x_;
  std::vector<int> y_;
  std::vector<int> arm_;
  GcompOptions opts_;
  std::optional<LogisticFit> ml_;
  std::optional<CounterfactualPredictions> ml_cf_;
  std::optional<LogisticFit> firth_;
};

/// One g-computation method (ge, liu, ye, boot, zhang, firth). Throws
/// NonConvergenceError if the working model fit did not converge.
RiskDiffInference infer(WorkingModel& model, Method method, double alpha,
                        const GcompOptions& opts = {});

RiskDiffInference infer(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                        Method method, double alpha, const GcompOptions& opts = {});

}  // namespace riskdiff
