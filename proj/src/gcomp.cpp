#include "riskdiff/gcomp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"
#include "riskdiff/numerics.hpp"
#include "riskdiff/rng.hpp"

namespace riskdiff {
namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (const double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Sample covariance (n - 1 denominator) over the subjects selected by `keep`.
template <class Keep>
double sample_cov(std::span<const double> a, std::span<const double> b, Keep keep) {
  double ma = 0.0;
  double mb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (keep(i)) {
      ma += a[i];
      mb += b[i];
      ++n;
    }
  if (n < 2) throw InsufficientDataError("sample covariance needs at least two subjects");
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (keep(i)) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(n - 1);
}

void require_model_covariance(const LogisticFit& fit) {
  for (const double v : fit.cov_model.data())
    if (!std::isfinite(v)) throw NumericalError("working model covariance is not finite");
}

}  // namespace

CounterfactualPredictions standardize(const LogisticFit& fit, const DesignMatrix& x) {
  if (fit.beta.size() != x.cols()) throw DomainError("fit does not match the design");
  if (x.cols() <= DesignMatrix::kTreatment) throw DesignError("design has no treatment column");
  const std::size_t n = x.rows();
  const auto& k = kernels::active();

  // X beta with the treatment column removed, then add beta_A for a = 1.
  std::vector<double> base(n);
  std::vector<double> beta = fit.beta;
  const double beta_a = beta[DesignMatrix::kTreatment];
  beta[DesignMatrix::kTreatment] = 0.0;
  k.gemv(x.data(), n, x.cols(), beta.data(), base.data());

  CounterfactualPredictions cf;
  cf.p0.resize(n);
  cf.p1.resize(n);
  k.expit(base.data(), cf.p0.data(), n);
  for (auto& e : base) e += beta_a;
  k.expit(base.data(), cf.p1.data(), n);
  cf.pi1 = mean(cf.p1);
  cf.pi0 = mean(cf.p0);
  cf.delta = cf.pi1 - cf.pi0;
  return cf;
}

std::vector<double> delta_gradient(const DesignMatrix& x, const CounterfactualPredictions& cf) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::vector<double> w1(n);
  std::vector<double> w0(n);
  for (std::size_t i = 0; i < n; ++i) {
    w1[i] = cf.p1[i] * (1.0 - cf.p1[i]);
    w0[i] = cf.p0[i] * (1.0 - cf.p0[i]);
  }
  std::vector<double> g(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    if (j == DesignMatrix::kTreatment) {
      // the treatment column is 1 under a = 1 and 0 under a = 0
      for (std::size_t i = 0; i < n; ++i) acc += w1[i];
    } else {
      const auto col = x.column(j);
      for (std::size_t i = 0; i < n; ++i) acc += (w1[i] - w0[i]) * col[i];
    }
    g[j] = acc / static_cast<double>(n);
  }
  for (const double v : g)
    if (!std::isfinite(v)) throw NumericalError("gradient of the standardized difference is not finite");
  return g;
}

double var_ge(const LogisticFit& fit, const DesignMatrix& x, const CounterfactualPredictions& cf) {
  require_model_covariance(fit);
  // The covariance is PSD; a negative form is rounding on a flat gradient.
  return std::max(0.0, fit.cov_model.quad_form(delta_gradient(x, cf)));
}

double covariate_variance_term(const CounterfactualPredictions& cf) {
  const std::size_t n = cf.p1.size();
  if (n < 2) throw InsufficientDataError("covariate variance needs at least two subjects");
  // Shifted by the first difference so that constant differences give
  // exactly zero.
  const double shift = cf.p1[0] - cf.p0[0];
  double s = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = cf.p1[i] - cf.p0[i] - shift;
    s += v;
    ss += v * v;
  }
  const double nn = static_cast<double>(n);
  return std::max(0.0, ss - s * s / nn) / (nn - 1.0) / nn;
}

double var_liu(const LogisticFit& fit, const DesignMatrix& x, std::span<const int> y,
               const CounterfactualPredictions& cf) {
  const SymMatrix hc3 = hc3_covariance(x, y, fit);
  return std::max(0.0, hc3.quad_form(delta_gradient(x, cf))) + covariate_variance_term(cf);
}

double var_ye(const LogisticFit& fit, const DesignMatrix& x, std::span<const int> y,
              std::span<const int> arm, const CounterfactualPredictions& cf) {
  (void)fit;
  const std::size_t n = x.rows();
  if (y.size() != n || arm.size() != n || cf.p1.size() != n)
    throw DomainError("inputs do not match the design");
  std::size_t n1 = 0;
  for (const int a : arm) n1 += (a == 1);
  const std::size_t n0 = n - n1;
  if (n1 < 2 || n0 < 2) throw InsufficientDataError("each arm needs at least two subjects");

  std::vector<double> yd(y.begin(), y.end());
  std::vector<double> r1(n);
  std::vector<double> r0(n);
  for (std::size_t i = 0; i < n; ++i) {
    r1[i] = yd[i] - cf.p1[i];
    r0[i] = yd[i] - cf.p0[i];
  }
  const auto in1 = [&](std::size_t i) { return arm[i] == 1; };
  const auto in0 = [&](std::size_t i) { return arm[i] == 0; };
  const auto all = [](std::size_t) { return true; };
  const double nn = static_cast<double>(n);

  const double v1 = nn / static_cast<double>(n1) * sample_cov(r1, r1, in1) +
                    2.0 * sample_cov(yd, cf.p1, in1) - sample_cov(cf.p1, cf.p1, all);
  const double v0 = nn / static_cast<double>(n0) * sample_cov(r0, r0, in0) +
                    2.0 * sample_cov(yd, cf.p0, in0) - sample_cov(cf.p0, cf.p0, all);
  const double c = sample_cov(yd, cf.p0, in1) + sample_cov(yd, cf.p1, in0) -
                   sample_cov(cf.p1, cf.p0, all);
  return (v1 + v0 - 2.0 * c) / nn;
}

BootstrapResult bootstrap_variance(std::size_t B, const ReplicateFn& replicate,
                                   std::size_t workers) {
  if (B < 2) throw DomainError("bootstrap needs B >= 2");
  std::vector<std::optional<double>> deltas(B);
  const auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t b = first; b < B; b += stride) {
      try {
        deltas[b] = replicate(b);
      } catch (const Error&) {
        deltas[b] = std::nullopt;
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, B);
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }

  BootstrapResult r;
  double sum = 0.0;
  for (const auto& d : deltas)
    if (d) {
      sum += *d;
      ++r.successes;
    }
  r.failures = B - r.successes;
  if (r.successes < std::max<std::size_t>(B / 2, 2)) throw BootstrapFailure(r.successes, r.failures);
  const double m = sum / static_cast<double>(r.successes);
  double ss = 0.0;
  for (const auto& d : deltas)
    if (d) ss += (*d - m) * (*d - m);
  r.variance = ss / static_cast<double>(r.successes - 1);
  return r;
}

BootstrapResult var_boot(const DesignMatrix& x, std::span<const int> y, std::size_t B,
                         std::uint64_t seed, std::size_t workers) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const ReplicateFn replicate = [&](std::size_t b) -> std::optional<double> {
    CounterRng rng(seed, b);
    std::vector<double> data(n * p);
    std::vector<int> yb(n);
    std::size_t treated = 0;
    std::size_t events = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = static_cast<std::size_t>(rng.below(n));
      for (std::size_t j = 0; j < p; ++j) data[j * n + i] = x(src, j);
      yb[i] = y[src];
      treated += x(src, DesignMatrix::kTreatment) == 1.0;
      events += static_cast<std::size_t>(yb[i]);
    }
    if (treated == 0 || treated == n || events == 0 || events == n) return std::nullopt;
    const DesignMatrix xb(n, p, std::move(data), x.names());
    const LogisticFit fit = fit_ml(xb, yb);
    if (!fit.converged) return std::nullopt;
    return standardize(fit, xb).delta;
  };
  return bootstrap_variance(B, replicate, workers);
}

BootstrapResult var_boot(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                         std::size_t B, std::uint64_t seed, std::size_t workers) {
  const DesignMatrix x = build_design(d, covariate_cols);
  return var_boot(x, d.y(), B, seed, workers);
}

ZhangScore zhang_score(double delta_hat, double var_hat, std::size_t n, double delta0) {
  if (!(var_hat >= 0.0)) throw DomainError("variance must be nonnegative");
  if (n == 0) throw DomainError("sample size must be positive");
  const double d = delta_hat - delta0;
  ZhangScore s;
  if (d == 0.0) return s;
  s.chi2 = d * d / (var_hat + d * d / static_cast<double>(n));
  s.p_value = chisq1_sf(s.chi2);
  return s;
}

Interval zhang_ci(double delta_hat, double var_hat, std::size_t n, double alpha, bool* truncated) {
  if (!(var_hat >= 0.0)) throw DomainError("variance must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const double z = norm_quantile(1.0 - alpha / 2.0);
  const double c = z * z;
  const double nn = static_cast<double>(n);
  if (c >= nn)
    throw DegenerateInversionError("score interval undefined: z^2 = " + std::to_string(c) +
                                   " is not below n = " + std::to_string(n));
  const double half = std::sqrt(c * var_hat / (1.0 - c / nn));
  const double lo = delta_hat - half;
  const double hi = delta_hat + half;
  if (truncated) *truncated = lo < -1.0 || hi > 1.0;
  return {std::max(-1.0, lo), std::min(1.0, hi)};
}

WorkingModel::WorkingModel(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                           const GcompOptions& opts)
    : x_(build_design(d, covariate_cols)),
      y_(d.y().begin(), d.y().end()),
      arm_(d.arm().begin(), d.arm().end()),
      opts_(opts) {}

const LogisticFit& WorkingModel::ml() {
  if (!ml_) ml_ = fit_ml(x_, y_, opts_.ml);
  return *ml_;
}

const CounterfactualPredictions& WorkingModel::ml_predictions() {
  if (!ml_cf_) ml_cf_ = standardize(ml(), x_);
  return *ml_cf_;
}

const LogisticFit& WorkingModel::firth() {
  if (!firth_) firth_ = fit_firth_flic(x_, y_, opts_.firth);
  return *firth_;
}

RiskDiffInference infer(WorkingModel& model, Method method, double alpha,
                        const GcompOptions& opts) {
  if (!uses_working_model(method))
    throw UsageError(std::string(method_name(method)) + " is not a g-computation method");
  RiskDiffInference r;
  r.method = method;
  r.estimand = estimand_of(method);

  const LogisticFit& ml = model.ml();
  r.flags.separation = ml.separation;
  r.flags.nonconvergence = !ml.converged;

  if (method == Method::firth) {
    const LogisticFit& fit = model.firth();
    if (!fit.converged) {
      r.flags.nonconvergence = true;
      throw NonConvergenceError("Firth working model did not converge");
    }
    const auto cf = standardize(fit, model.design());
    const double var = var_ge(fit, model.design(), cf);
    const WaldResult w = wald(cf.delta, var, alpha);
    r.estimate = cf.delta;
    r.se = std::sqrt(var);
    r.ci = w.ci;
    r.flags.ci_truncated = w.truncated;
    r.statistic = w.z;
    r.p_value = w.p_value;
    if (fit.flic_unbounded) r.note = "intercept correction skipped: outcome is constant";
    return r;
  }

  if (!ml.converged) throw NonConvergenceError("ML working model did not converge");
  const auto& cf = model.ml_predictions();
  const auto& x = model.design();
  r.estimate = cf.delta;

  double var = 0.0;
  switch (method) {
    case Method::ge: var = var_ge(ml, x, cf); break;
    case Method::liu: var = var_liu(ml, x, model.y(), cf); break;
    case Method::ye: var = var_ye(ml, x, model.y(), model.arm(), cf); break;
    case Method::boot: {
      const auto b = var_boot(x, model.y(), opts.boot_b, opts.seed, opts.boot_workers);
      var = b.variance;
      r.flags.bootstrap_failures = b.failures;
      break;
    }
    case Method::zhang:
      switch (opts.zhang_variance) {
        case ZhangVariance::ge: var = var_ge(ml, x, cf); break;
        case ZhangVariance::liu: var = var_liu(ml, x, model.y(), cf); break;
        case ZhangVariance::ye: var = var_ye(ml, x, model.y(), model.arm(), cf); break;
      }
      break;
    default: break;
  }
  if (!std::isfinite(var) || var < 0.0) throw NumericalError("variance estimate is negative");
  r.se = std::sqrt(var);

  if (method == Method::zhang) {
    const auto s = zhang_score(cf.delta, var, x.rows());
    bool truncated = false;
    r.ci = zhang_ci(cf.delta, var, x.rows(), alpha, &truncated);
    r.flags.ci_truncated = truncated;
    r.statistic = s.chi2;
    r.p_value = s.p_value;
    return r;
  }
  const WaldResult w = wald(cf.delta, var, alpha);
  r.ci = w.ci;
  r.flags.ci_truncated = w.truncated;
  r.statistic = w.z;
  r.p_value = w.p_value;
  return r;
}

RiskDiffInference infer(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                        Method method, double alpha, const GcompOptions& opts) {
  WorkingModel model(d, covariate_cols, opts);
  return infer(model, method, alpha, opts);
}

}  // namespace riskdiff
