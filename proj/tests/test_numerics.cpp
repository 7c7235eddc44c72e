#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "riskdiff/error.hpp"
#include "riskdiff/numerics.hpp"

using namespace riskdiff;

namespace {

// erf by its Maclaurin series in long double; converges for the |x| < 3 used
// here.
long double erf_series(long double x) {
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-30L) break;
  }
  return sum * 2.0L / std::sqrt(3.14159265358979323846264338327950288L);
}

long double series_cdf(long double z) { return 0.5L * (1.0L + erf_series(z / std::sqrt(2.0L))); }

double bisect_quantile(double p) {
  long double lo = -6.0L;
  long double hi = 6.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (series_cdf(mid) < p ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

SymMatrix random_spd(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<double> nd;
  std::vector<double> b(dim * dim);
  for (auto& v : b) v = nd(gen);
  SymMatrix a(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      double acc = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < dim; ++k) acc += b[k * dim + i] * b[k * dim + j];
      a(i, j) = acc;
    }
  return a;
}

}  // namespace

TEST_CASE("log_choose") {
  CHECK(log_choose(5, 0) == 0.0);
  CHECK(log_choose(4, 2) == doctest::Approx(std::log(6.0)).epsilon(1e-14));

  double brute = 0.0;
  for (int i = 1; i <= 75; ++i) brute += std::log(75.0 + i) - std::log(static_cast<double>(i));
  CHECK(std::abs(log_choose(150, 75) - brute) < 1e-9);

  CHECK_THROWS_AS(log_choose(3, 4), DomainError);
}

TEST_CASE("log_choose satisfies Pascal's rule") {
  for (long n = 1; n <= 60; ++n)
    for (long k = 1; k < n; ++k) {
      const double lhs = std::exp(log_choose(n, k));
      const double rhs = std::exp(log_choose(n - 1, k - 1)) + std::exp(log_choose(n - 1, k));
      CHECK(std::abs(lhs - rhs) <= 1e-9 * rhs);
    }
}

TEST_CASE("normal distribution") {
  CHECK(norm_cdf(0.0) == 0.5);
  for (const double z : {0.5, 1.0, 2.0}) CHECK(norm_cdf(-z) + norm_cdf(z) == doctest::Approx(1.0));

  const double oracle = bisect_quantile(0.975);
  CHECK(std::abs(oracle - 1.9599640) < 1e-7);
  CHECK(std::abs(norm_quantile(0.975) - oracle) < 1e-7);

  for (const double p : {1e-8, 1e-5, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-5, 1 - 1e-8})
    CHECK(std::abs(norm_cdf(norm_quantile(p)) - p) < 1e-10);
  for (double z = -6.0; z <= 6.0; z += 0.25) CHECK(std::abs(norm_quantile(norm_cdf(z)) - z) < 1e-8);

  CHECK_THROWS_AS(norm_quantile(0.0), DomainError);
  CHECK_THROWS_AS(norm_quantile(1.0), DomainError);
}

TEST_CASE("chi-square with one degree of freedom") {
  CHECK(chisq1_sf(0.0) == 1.0);
  CHECK(std::abs(chisq1_sf(3.8414588) - 0.05) < 1e-6);
  CHECK(chisq1_sf(1.2 * 1.2) == doctest::Approx(2.0 * (1.0 - norm_cdf(1.2))).epsilon(1e-12));
  for (const double a : {0.2, 0.1, 0.05, 0.01}) {
    const double q = norm_quantile(1.0 - a / 2.0);
    CHECK(std::abs(chisq1_sf(q * q) - a) < 1e-9);
  }
  CHECK_THROWS_AS(chisq1_sf(-1.0), DomainError);
}

TEST_CASE("SPD solve and inverse") {
  const auto id = SymMatrix::identity(3);
  const std::vector<double> rhs{1, 2, 3};
  CHECK(spd_solve(id, rhs) == rhs);

  SymMatrix m(2);
  m(0, 0) = 4;
  m(0, 1) = m(1, 0) = 1;
  m(1, 1) = 3;
  const auto x = spd_solve(m, std::vector<double>{1, 2});
  CHECK(x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-14));

  SymMatrix zero(3, 0.0);
  try {
    spd_solve(zero, rhs);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.pivot() == 0);
  }

  SymMatrix rank1(2, 1.0);
  try {
    spd_inverse(rank1);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("SPD solve residuals on random matrices") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t dim = 1 + static_cast<std::size_t>(rep % 6);
    const SymMatrix a = random_spd(gen, dim);
    std::vector<double> b(dim);
    for (auto& v : b) v = nd(gen);
    const auto x = spd_solve(a, b);
    const auto ax = a.multiply(x);
    double res = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      res = std::max(res, std::abs(ax[i] - b[i]));
      scale = std::max(scale, std::abs(b[i]));
    }
    CHECK(res <= 1e-9 * std::max(1.0, scale));

    const SymMatrix inv = spd_inverse(a);
    CHECK(inv.is_symmetric());
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) acc += a(i, k) * inv(k, j);
        CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-9);
      }
  }
}

TEST_CASE("Cholesky log determinant") {
  SymMatrix m(2);
  m(0, 0) = 4;
  m(0, 1) = m(1, 0) = 1;
  m(1, 1) = 3;
  CHECK(Cholesky(m).log_det() == doctest::Approx(std::log(11.0)).epsilon(1e-14));
}

TEST_CASE("expit and logit") {
  CHECK(expit(0.0) == 0.5);
  CHECK(logit(0.2) == doctest::Approx(-1.3862944).epsilon(1e-7));
  CHECK(std::abs(expit(logit(0.07)) - 0.07) < 1e-14);
  CHECK(expit(-800.0) >= 0.0);
  CHECK(!std::isnan(expit(-800.0)));
  CHECK(expit(800.0) == 1.0);
  for (double q = 1e-10; q < 1.0; q = q * 3.7 > 0.5 ? 1.0 - (1.0 - q) / 3.7 : q * 3.7) {
    if (q > 1.0 - 1e-10) break;
    CHECK(std::abs(expit(logit(q)) - q) < 1e-12);
  }
  CHECK_THROWS_AS(logit(0.0), DomainError);
  CHECK_THROWS_AS(logit(1.0), DomainError);
}

TEST_CASE("log_add_exp") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_add_exp(-inf, 1.5) == 1.5);
  CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(log_add_exp(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
}
