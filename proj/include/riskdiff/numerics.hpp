#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace riskdiff {

/// Dense symmetric matrix stored in full row-major form.
///
/// Sized for working-model covariance matrices (a handful of columns), so no
/// attempt is made at packed storage.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0);

  static SymMatrix identity(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  /// Copies the upper triangle onto the lower one.
  void symmetrize_from_upper();
  bool is_symmetric(double rel_tol = 1e-12) const;

  /// x^T M x
  double quad_form(std::span<const double> x) const;
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular Cholesky factor of an SPD matrix. Throws
/// SingularMatrixError carrying the index of the first non-positive pivot.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& m);

  std::vector<double> solve(std::span<const double> rhs) const;
  SymMatrix inverse() const;
  /// ln det of the factored matrix.
  double log_det() const;
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  std::vector<double> lower_;
};

std::vector<double> spd_solve(const SymMatrix& m, std::span<const double> rhs);
SymMatrix spd_inverse(const SymMatrix& m);

double log_choose(long n, long k);

double norm_cdf(double z);
double norm_quantile(double p);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chisq1_sf(double x);

double expit(double u);
double logit(double q);

/// ln(exp(a) + exp(b)) without overflow; -inf is the additive identity.
double log_add_exp(double a, double b);

}  // namespace riskdiff
