#pragma once

#include <array>

#include "riskdiff/rng.hpp"
#include "riskdiff/trialdata.hpp"

namespace riskdiff {

/// Two independent Bernoulli(1/2) covariates X1, X2 with a common log-odds
/// coefficient, 1:1 simple randomization.
struct ScenarioParams {
  long n = 30;
  double delta = 0.0;
  double beta_cov = 0.0;
  double p0 = 0.20;
  double alloc = 0.5;
};

struct SolvedCoefficients {
  double beta0 = 0.0;
  double betaA = 0.0;
  double achieved_p0 = 0.0;
  double achieved_delta = 0.0;
};

/// Average of expit(beta0 + betaA_times_a + beta_cov * (x1 + x2)) over the
/// four equally likely covariate cells.
double marginal_mean(double beta0, double betaA_times_a, double beta_cov);

/// Bisection for beta0 (control mean p0), then betaA (treated mean
/// p0 + delta). Throws BracketError if a target is out of reach.
SolvedCoefficients solve_coefficients(const ScenarioParams& p);

/// P(Y = 1 | A = a, X1 = x1, X2 = x2), indexed [a][x1][x2].
std::array<std::array<std::array<double, 2>, 2>, 2> cell_probabilities(
    const ScenarioParams& p, const SolvedCoefficients& c);

/// Draws n subjects, four uniforms each in the order arm, x1, x2, y.
/// Covariate columns are named X1 and X2.
TrialDataset gen_trial(const ScenarioParams& p, const SolvedCoefficients& c, CounterRng& rng);

}  // namespace riskdiff
