#include "riskdiff/glm_logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"

namespace riskdiff {

DesignMatrix::DesignMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                           std::vector<std::string> names)
    : rows_(rows), cols_(cols), data_(std::move(data)), names_(std::move(names)) {
  if (cols_ < 1) throw DesignError("design needs an intercept column");
  if (data_.size() != rows_ * cols_) throw DesignError("design data has the wrong size");
  if (names_.size() != cols_) throw DesignError("design needs one name per column");
  for (std::size_t i = 0; i < rows_; ++i)
    if ((*this)(i, kIntercept) != 1.0) throw DesignError("first design column must be all ones");
}

DesignMatrix DesignMatrix::with_treatment(double a) const {
  if (cols_ <= kTreatment) throw DesignError("design has no treatment column");
  DesignMatrix out = *this;
  std::fill_n(out.data_.begin() + static_cast<std::ptrdiff_t>(kTreatment * rows_), rows_, a);
  return out;
}

DesignMatrix build_design(const TrialDataset& d, const std::vector<std::string>& covariate_cols) {
  const std::size_t n = d.n();
  std::vector<double> data(n, 1.0);
  std::vector<std::string> names{"(Intercept)", "arm"};
  for (const int a : d.arm()) data.push_back(static_cast<double>(a));

  for (const auto& name : covariate_cols) {
    const Covariate& c = d.covariate(name);
    if (c.kind == CovariateKind::real || c.is_binary()) {
      data.insert(data.end(), c.values.begin(), c.values.end());
      names.push_back(name);
      continue;
    }
    for (std::size_t l = 1; l < c.levels.size(); ++l) {
      const double level = c.levels[l];
      for (const double v : c.values) data.push_back(v == level ? 1.0 : 0.0);
      names.push_back(name + "=" + std::to_string(c.levels[l]));
    }
  }
  const std::size_t cols = names.size();
  return DesignMatrix(n, cols, std::move(data), std::move(names));
}

namespace {

// Per-fit scratch: linear predictor, probabilities, weights.
struct State {
  std::vector<double> eta;
  std::vector<double> p;
  std::vector<double> w;

  explicit State(std::size_t n) : eta(n), p(n), w(n) {}

  void evaluate(const DesignMatrix& x, std::span<const double> beta) {
    const auto& k = kernels::active();
    k.gemv(x.data(), x.rows(), x.cols(), beta.data(), eta.data());
    k.expit(eta.data(), p.data(), eta.size());
    for (std::size_t i = 0; i < p.size(); ++i) w[i] = p[i] * (1.0 - p[i]);
  }
};

double loglik_from_eta(std::span<const double> eta, std::span<const int> y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) evaluated without overflow
    const double softplus = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
    ll += y[i] * e - softplus;
  }
  return ll;
}

SymMatrix gram(const DesignMatrix& x, std::span<const double> w) {
  SymMatrix g(x.cols());
  kernels::active().weighted_gram(x.data(), x.rows(), x.cols(), w.data(), g.data().data());
  return g;
}

std::vector<double> score(const DesignMatrix& x, std::span<const double> r) {
  std::vector<double> s(x.cols());
  kernels::active().gemv_t(x.data(), x.rows(), x.cols(), r.data(), s.data());
  return s;
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (const double e : v) m = std::max(m, std::abs(e));
  return m;
}

void check_design(const DesignMatrix& x, std::span<const int> y) {
  if (y.size() != x.rows()) throw DesignError("outcome length does not match design rows");
  if (x.rows() <= x.cols())
    throw DesignError("need more subjects (" + std::to_string(x.rows()) + ") than columns (" +
                      std::to_string(x.cols()) + ")");
  std::vector<double> ones(x.rows(), 1.0);
  try {
    Cholesky chol(gram(x, ones));
    (void)chol;
  } catch (const SingularMatrixError& e) {
    throw DesignError("design matrix is rank deficient (column " +
                      x.names()[e.pivot()] + " is collinear with earlier columns)");
  }
}

std::vector<double> initial_beta(const DesignMatrix& x, std::span<const int> y) {
  std::vector<double> beta(x.cols(), 0.0);
  double events = 0.0;
  for (const int v : y) events += v;
  beta[DesignMatrix::kIntercept] = logit((events + 0.5) / (static_cast<double>(y.size()) + 1.0));
  return beta;
}

std::vector<double> hat_values(const DesignMatrix& x, std::span<const double> w,
                               const SymMatrix& cov) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::vector<double> h(n);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) row[j] = x(i, j);
    h[i] = w[i] * cov.quad_form(row);
  }
  return h;
}

// Fills the derived members of a fit from its final coefficients. Returns
// false if the information matrix is numerically singular.
bool finalize(const DesignMatrix& x, LogisticFit& fit) {
  State st(x.rows());
  st.evaluate(x, fit.beta);
  fit.fitted = st.p;
  try {
    fit.cov_model = spd_inverse(gram(x, st.w));
  } catch (const SingularMatrixError&) {
    fit.cov_model = SymMatrix(x.cols(), std::numeric_limits<double>::quiet_NaN());
    fit.hat.assign(x.rows(), std::numeric_limits<double>::quiet_NaN());
    return false;
  }
  fit.hat = hat_values(x, st.w, fit.cov_model);
  return true;
}

}  // namespace

double log_likelihood(const DesignMatrix& x, std::span<const int> y,
                      std::span<const double> beta) {
  std::vector<double> eta(x.rows());
  kernels::active().gemv(x.data(), x.rows(), x.cols(), beta.data(), eta.data());
  return loglik_from_eta(eta, y);
}

SymMatrix fisher_information(const DesignMatrix& x, std::span<const double> beta) {
  State st(x.rows());
  st.evaluate(x, beta);
  return gram(x, st.w);
}

double firth_log_likelihood(const DesignMatrix& x, std::span<const int> y,
                            std::span<const double> beta) {
  State st(x.rows());
  st.evaluate(x, beta);
  const double ll = loglik_from_eta(st.eta, y);
  try {
    return ll + 0.5 * Cholesky(gram(x, st.w)).log_det();
  } catch (const SingularMatrixError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

LogisticFit fit_ml(const DesignMatrix& x, std::span<const int> y, const FitOptions& opts) {
  check_design(x, y);
  const std::size_t n = x.rows();

  LogisticFit fit;
  fit.penalized = Penalty::none;
  fit.beta = initial_beta(x, y);

  State st(n);
  std::vector<double> resid(n);
  st.evaluate(x, fit.beta);
  double ll = loglik_from_eta(st.eta, y);

  for (int it = 1; it <= opts.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - st.p[i];
    const auto u = score(x, resid);

    std::vector<double> step;
    try {
      step = spd_solve(gram(x, st.w), u);
    } catch (const SingularMatrixError&) {
      break;
    }

    // Newton step with halving if the deviance goes up.
    std::vector<double> trial(fit.beta.size());
    double ll_new = -std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = fit.beta[j] + scale * step[j];
      st.evaluate(x, trial);
      ll_new = loglik_from_eta(st.eta, y);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::abs(ll)) break;
      scale *= 0.5;
    }
    fit.beta = trial;
    fit.iterations = it;

    const double dev = -2.0 * ll_new;
    const double rel_change = std::abs(2.0 * (ll - ll_new)) / (std::abs(dev) + 0.1);
    ll = ll_new;

    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - st.p[i];
    if (sup_norm(score(x, resid)) < opts.tol || rel_change < opts.deviance_tol) {
      fit.converged = true;
      break;
    }
  }

  // Newton converges quadratically, so a few full steps past the stopping rule
  // bring a regular fit to machine precision. Separated fits have no finite
  // optimum to polish toward and are left where the stopping rule put them.
  const auto near_boundary = [&] {
    for (const double p : st.p)
      if (p < kSeparationProbMargin || p > 1.0 - kSeparationProbMargin) return true;
    for (const double b : fit.beta)
      if (!(std::abs(b) <= kSeparationMaxCoef)) return true;
    return false;
  };
  if (fit.converged && !near_boundary()) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - st.p[i];
    double norm = sup_norm(score(x, resid));
    for (int polish = 0; polish < 3 && norm > 0.0; ++polish) {
      std::vector<double> step;
      try {
        step = spd_solve(gram(x, st.w), score(x, resid));
      } catch (const SingularMatrixError&) {
        break;
      }
      std::vector<double> trial(fit.beta.size());
      for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = fit.beta[j] + step[j];
      st.evaluate(x, trial);
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - st.p[i];
      const double trial_norm = sup_norm(score(x, r));
      if (!(trial_norm < norm)) {
        st.evaluate(x, fit.beta);
        break;
      }
      fit.beta = trial;
      resid = r;
      norm = trial_norm;
    }
  }

  if (!finalize(x, fit)) fit.converged = false;
  fit.separation = detect_separation(fit);
  return fit;
}

bool detect_separation(const LogisticFit& fit) {
  for (const double p : fit.fitted)
    if (p < kSeparationProbMargin || p > 1.0 - kSeparationProbMargin) return true;
  for (const double b : fit.beta)
    if (!(std::abs(b) <= kSeparationMaxCoef)) return true;
  return false;
}

namespace {

// Stage 2 of FLIC: with the slopes fixed, solve sum(y - expit(b0 + offset))
// = 0 for the intercept. Returns nullopt when no finite root exists.
std::optional<double> refit_intercept(std::span<const double> offset, std::span<const int> y,
                                      double start) {
  double events = 0.0;
  for (const int v : y) events += v;
  const auto n = static_cast<double>(y.size());
  if (events <= 0.0 || events >= n) return std::nullopt;

  const auto f = [&](double b0, double* deriv) {
    double s = 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < offset.size(); ++i) {
      const double p = expit(b0 + offset[i]);
      s += p;
      d += p * (1.0 - p);
    }
    if (deriv) *deriv = -d;
    return events - s;
  };

  // f is strictly decreasing; bracket the root, then safeguarded Newton.
  double lo = start - 1.0;
  double hi = start + 1.0;
  while (f(lo, nullptr) < 0.0) lo -= 2.0 * (hi - lo);
  while (f(hi, nullptr) > 0.0) hi += 2.0 * (hi - lo);

  double b = std::clamp(start, lo, hi);
  for (int it = 0; it < 200; ++it) {
    double d = 0.0;
    const double v = f(b, &d);
    if (std::abs(v) < 1e-12 * n) return b;
    if (v > 0.0) lo = b; else hi = b;
    double next = (d < 0.0) ? b - v / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(b))) return next;
    b = next;
  }
  return b;
}

}  // namespace

LogisticFit fit_firth_flic(const DesignMatrix& x, std::span<const int> y, const FitOptions& opts) {
  check_design(x, y);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  constexpr double kMaxStep = 5.0;

  LogisticFit fit;
  fit.penalized = Penalty::firth_flic;
  fit.beta = initial_beta(x, y);

  State st(n);
  std::vector<double> pseudo(n);
  double pll = firth_log_likelihood(x, y, fit.beta);
  bool stage1_converged = false;

  for (int it = 1; it <= opts.max_iter; ++it) {
    st.evaluate(x, fit.beta);
    SymMatrix cov;
    try {
      cov = spd_inverse(gram(x, st.w));
    } catch (const SingularMatrixError&) {
      break;
    }
    const auto h = hat_values(x, st.w, cov);
    for (std::size_t i = 0; i < n; ++i) pseudo[i] = y[i] - st.p[i] + h[i] * (0.5 - st.p[i]);
    const auto u = score(x, pseudo);
    auto step = cov.multiply(u);

    const double largest = sup_norm(step);
    if (largest > kMaxStep)
      for (auto& s : step) s *= kMaxStep / largest;

    if (sup_norm(u) < opts.tol && largest < opts.tol) {
      stage1_converged = true;
      fit.iterations = it;
      break;
    }

    std::vector<double> trial(p);
    double pll_new = -std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      for (std::size_t j = 0; j < p; ++j) trial[j] = fit.beta[j] + scale * step[j];
      pll_new = firth_log_likelihood(x, y, trial);
      if (std::isfinite(pll_new) && pll_new >= pll - 1e-12 * std::abs(pll)) break;
      scale *= 0.5;
    }
    fit.beta = trial;
    pll = pll_new;
    fit.iterations = it;
  }

  // FLIC: re-estimate the intercept by ordinary ML with the penalized slopes
  // held fixed, so the average prediction matches the event rate.
  std::vector<double> offset(n);
  {
    std::vector<double> slopes = fit.beta;
    slopes[DesignMatrix::kIntercept] = 0.0;
    kernels::active().gemv(x.data(), n, p, slopes.data(), offset.data());
  }
  if (const auto b0 = refit_intercept(offset, y, fit.beta[DesignMatrix::kIntercept])) {
    fit.beta[DesignMatrix::kIntercept] = *b0;
  } else {
    fit.flic_unbounded = true;
  }

  const bool invertible = finalize(x, fit);
  fit.converged = stage1_converged && invertible;
  fit.separation = detect_separation(fit);
  return fit;
}

SymMatrix hc3_covariance(const DesignMatrix& x, std::span<const int> y, const LogisticFit& fit) {
  const std::size_t n = x.rows();
  if (fit.fitted.size() != n || fit.hat.size() != n)
    throw DomainError("fit does not match the design");
  std::vector<double> w(n);
  std::vector<double> meat_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = fit.hat[i];
    if (!(h < 1.0 - 1e-12)) throw DegenerateLeverageError(i + 1);
    const double r = y[i] - fit.fitted[i];
    w[i] = fit.fitted[i] * (1.0 - fit.fitted[i]);
    meat_w[i] = r * r / ((1.0 - h) * (1.0 - h));
  }
  const std::size_t p = x.cols();
  if (std::all_of(meat_w.begin(), meat_w.end(), [](double v) { return v == 0.0; }))
    return SymMatrix(p);
  const SymMatrix bread = spd_inverse(gram(x, w));
  const SymMatrix meat = gram(x, meat_w);

  SymMatrix tmp(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += bread(i, k) * meat(k, j);
      tmp(i, j) = acc;
    }
  SymMatrix out(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += tmp(i, k) * bread(k, j);
      out(i, j) = acc;
    }
  out.symmetrize_from_upper();
  return out;
}

}  // namespace riskdiff
