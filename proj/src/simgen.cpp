#include "riskdiff/simgen.hpp"

#include <cmath>

#include "riskdiff/error.hpp"
#include "riskdiff/numerics.hpp"

namespace riskdiff {
namespace {

constexpr double kBracket = 20.0;
constexpr int kMaxBisections = 200;
constexpr double kTargetTol = 1e-12;

// Root of the increasing function f(b) = target on [-20, 20].
template <class F>
double bisect(F f, double target, const char* what) {
  double lo = -kBracket;
  double hi = kBracket;
  if (f(lo) > target || f(hi) < target)
    throw BracketError(std::string(what) + " target " + std::to_string(target) +
                       " is outside the attainable range");
  double mid = 0.0;
  for (int it = 0; it < kMaxBisections; ++it) {
    mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(v - target) < kTargetTol) break;
    if (v < target)
      lo = mid;
    else
      hi = mid;
  }
  return mid;
}

void validate(const ScenarioParams& p) {
  if (p.n < 2) throw DomainError("n must be at least 2");
  if (!(p.p0 > 0.0 && p.p0 < 1.0)) throw DomainError("p0 must lie in (0, 1)");
  if (!(p.p0 + p.delta > 0.0 && p.p0 + p.delta < 1.0))
    throw DomainError("p0 + delta must lie in (0, 1)");
  if (!std::isfinite(p.beta_cov)) throw DomainError("beta_cov must be finite");
  if (!(p.alloc > 0.0 && p.alloc < 1.0)) throw DomainError("alloc must lie in (0, 1)");
}

}  // namespace

double marginal_mean(double beta0, double betaA_times_a, double beta_cov) {
  const double eta = beta0 + betaA_times_a;
  return 0.25 * (expit(eta) + 2.0 * expit(eta + beta_cov) + expit(eta + 2.0 * beta_cov));
}

SolvedCoefficients solve_coefficients(const ScenarioParams& p) {
  validate(p);
  SolvedCoefficients c;
  c.beta0 = bisect([&](double b) { return marginal_mean(b, 0.0, p.beta_cov); }, p.p0, "control");
  c.betaA = bisect([&](double b) { return marginal_mean(c.beta0, b, p.beta_cov); },
                   p.p0 + p.delta, "treated");
  c.achieved_p0 = marginal_mean(c.beta0, 0.0, p.beta_cov);
  c.achieved_delta = marginal_mean(c.beta0, c.betaA, p.beta_cov) - c.achieved_p0;
  return c;
}

std::array<std::array<std::array<double, 2>, 2>, 2> cell_probabilities(
    const ScenarioParams& p, const SolvedCoefficients& c) {
  std::array<std::array<std::array<double, 2>, 2>, 2> out{};
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        out[a][x1][x2] = expit(c.beta0 + c.betaA * a + p.beta_cov * (x1 + x2));
  return out;
}

TrialDataset gen_trial(const ScenarioParams& p, const SolvedCoefficients& c, CounterRng& rng) {
  validate(p);
  const auto n = static_cast<std::size_t>(p.n);
  std::vector<int> y(n);
  std::vector<int> arm(n);
  std::vector<double> x1(n);
  std::vector<double> x2(n);
  // Cell probabilities depend only on (a, x1 + x2).
  double q[2][3];
  for (int a = 0; a < 2; ++a)
    for (int k = 0; k < 3; ++k) q[a][k] = expit(c.beta0 + c.betaA * a + p.beta_cov * k);
  for (std::size_t i = 0; i < n; ++i) {
    arm[i] = rng.uniform() < p.alloc;
    const int a1 = rng.uniform() < 0.5;
    const int a2 = rng.uniform() < 0.5;
    x1[i] = a1;
    x2[i] = a2;
    y[i] = rng.uniform() < q[arm[i]][a1 + a2];
  }
  std::vector<Covariate> cov;
  cov.push_back(make_covariate("X1", std::move(x1)));
  cov.push_back(make_covariate("X2", std::move(x2)));
  return TrialDataset(std::move(y), std::move(arm), std::move(cov));
}

}  // namespace riskdiff
