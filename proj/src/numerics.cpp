#include "riskdiff/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "riskdiff/error.hpp"

namespace riskdiff {

SymMatrix::SymMatrix(std::size_t dim, double fill) : dim_(dim), data_(dim * dim, fill) {
  if (dim == 0) throw DomainError("SymMatrix dimension must be positive");
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

void SymMatrix::symmetrize_from_upper() {
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < i; ++j) (*this)(i, j) = (*this)(j, i);
}

bool SymMatrix::is_symmetric(double rel_tol) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double a = (*this)(i, j);
      const double b = (*this)(j, i);
      const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
      if (std::abs(a - b) > rel_tol * scale) return false;
    }
  }
  return true;
}

double SymMatrix::quad_form(std::span<const double> x) const {
  if (x.size() != dim_) throw DomainError("quad_form: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) row += (*this)(i, j) * x[j];
    acc += x[i] * row;
  }
  return acc;
}

std::vector<double> SymMatrix::multiply(std::span<const double> x) const {
  if (x.size() != dim_) throw DomainError("multiply: dimension mismatch");
  std::vector<double> out(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) out[i] += (*this)(i, j) * x[j];
  return out;
}

Cholesky::Cholesky(const SymMatrix& m) : dim_(m.dim()), lower_(m.dim() * m.dim(), 0.0) {
  for (std::size_t j = 0; j < dim_; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower_[j * dim_ + k] * lower_[j * dim_ + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) throw SingularMatrixError(j, diag);
    const double root = std::sqrt(diag);
    lower_[j * dim_ + j] = root;
    for (std::size_t i = j + 1; i < dim_; ++i) {
      double v = m(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= lower_[i * dim_ + k] * lower_[j * dim_ + k];
      lower_[i * dim_ + j] = v / root;
    }
  }
}

std::vector<double> Cholesky::solve(std::span<const double> rhs) const {
  if (rhs.size() != dim_) throw DomainError("solve: dimension mismatch");
  std::vector<double> x(rhs.begin(), rhs.end());
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= lower_[i * dim_ + k] * x[k];
    x[i] /= lower_[i * dim_ + i];
  }
  for (std::size_t ii = dim_; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < dim_; ++k) x[ii] -= lower_[k * dim_ + ii] * x[k];
    x[ii] /= lower_[ii * dim_ + ii];
  }
  return x;
}

SymMatrix Cholesky::inverse() const {
  SymMatrix inv(dim_);
  std::vector<double> e(dim_, 0.0);
  for (std::size_t j = 0; j < dim_; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const auto col = solve(e);
    for (std::size_t i = 0; i < dim_; ++i) inv(i, j) = col[i];
  }
  // Average the two triangles so the result is symmetric to the last bit.
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  return inv;
}

double Cholesky::log_det() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) acc += std::log(lower_[i * dim_ + i]);
  return 2.0 * acc;
}

std::vector<double> spd_solve(const SymMatrix& m, std::span<const double> rhs) {
  return Cholesky(m).solve(rhs);
}

SymMatrix spd_inverse(const SymMatrix& m) { return Cholesky(m).inverse(); }

namespace {

constexpr long kLogFactorialTable = 2048;

const std::array<double, kLogFactorialTable>& log_factorials() {
  static const auto table = [] {
    std::array<double, kLogFactorialTable> t{};
    for (long i = 0; i < kLogFactorialTable; ++i) t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return t;
  }();
  return table;
}

double log_factorial(long n) {
  if (n < kLogFactorialTable) return log_factorials()[n];
  // lgamma may touch the global signgam; only reached for very large n.
  return std::lgamma(static_cast<double>(n) + 1.0);
}

}  // namespace

double log_choose(long n, long k) {
  if (n < 0 || k < 0 || k > n) throw DomainError("log_choose requires 0 <= k <= n");
  if (k == 0 || k == n) return 0.0;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile requires 0 < p < 1");

  // Acklam's rational approximation, relative error ~1e-9.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement against the erfc-based cdf. The residual is taken on
  // the smaller tail so it keeps full relative precision.
  for (int it = 0; it < 2; ++it) {
    const double e = (p < 0.5) ? norm_cdf(x) - p : (1.0 - p) - norm_cdf(-x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double chisq1_sf(double x) {
  if (!(x >= 0.0)) throw DomainError("chisq1_sf requires x >= 0");
  if (std::isinf(x)) return 0.0;
  // 2 * (1 - Phi(sqrt(x))) written through erfc to keep tail precision.
  return std::erfc(std::sqrt(0.5 * x));
}

double expit(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double logit(double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("logit requires 0 < q < 1");
  return std::log(q) - std::log1p(-q);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace riskdiff
