#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "riskdiff/numerics.hpp"
#include "riskdiff/trialdata.hpp"

namespace riskdiff {

/// Working-model design: intercept, treatment indicator, then covariate
/// columns. Column-major storage so the kernels can stream columns.
class DesignMatrix {
 public:
  static constexpr std::size_t kIntercept = 0;
  static constexpr std::size_t kTreatment = 1;

  DesignMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
               std::vector<std::string> names);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }
  std::span<const double> column(std::size_t j) const {
    return {data_.data() + j * rows_, rows_};
  }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Copy with the treatment column overwritten by `a` for every subject.
  DesignMatrix with_treatment(double a) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
  std::vector<std::string> names_;
};

/// Categorical covariates are expanded to indicators of every level above
/// the lowest one; a {0,1} column stays a single column.
DesignMatrix build_design(const TrialDataset& d, const std::vector<std::string>& covariate_cols);

enum class Penalty { none, firth_flic };

struct FitOptions {
  int max_iter = 25;
  double tol = 1e-8;            // sup-norm of the score
  double deviance_tol = 1e-10;  // |dev - dev_prev| / (|dev| + 0.1)
};

struct LogisticFit {
  std::vector<double> beta;
  SymMatrix cov_model;          // inverse information at beta
  std::vector<double> fitted;   // P(Y = 1) per subject
  std::vector<double> hat;      // leverages h_i
  bool converged = false;
  bool separation = false;
  Penalty penalized = Penalty::none;
  int iterations = 0;
  // FLIC could not refit the intercept (outcome constant); the stage-1
  // intercept was kept.
  bool flic_unbounded = false;
};

inline constexpr double kSeparationProbMargin = 1e-7;
inline constexpr double kSeparationMaxCoef = 15.0;

LogisticFit fit_ml(const DesignMatrix& x, std::span<const int> y, const FitOptions& opts = {});

/// Firth (Jeffreys-prior) penalized fit followed by the FLIC intercept
/// correction. The default iteration cap is higher than for ML because the
/// modified-score iteration converges linearly.
LogisticFit fit_firth_flic(const DesignMatrix& x, std::span<const int> y,
                           const FitOptions& opts = {.max_iter = 100});

bool detect_separation(const LogisticFit& fit);

SymMatrix hc3_covariance(const DesignMatrix& x, std::span<const int> y, const LogisticFit& fit);

double log_likelihood(const DesignMatrix& x, std::span<const int> y, std::span<const double> beta);

/// log L(beta) + 0.5 * ln det I(beta)
double firth_log_likelihood(const DesignMatrix& x, std::span<const int> y,
                            std::span<const double> beta);

/// X^T W X at beta, W = diag(p(1-p)).
SymMatrix fisher_information(const DesignMatrix& x, std::span<const double> beta);

}  // namespace riskdiff
