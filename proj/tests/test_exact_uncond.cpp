#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "riskdiff/exact_uncond.hpp"

using namespace riskdiff;

namespace {

double binom_pmf(long k, long n, double t) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                  (k > 0 ? k * std::log(t) : 0.0) + (n - k > 0 ? (n - k) * std::log1p(-t) : 0.0));
}

double z_direct(long k1, long n1, long k0, long n0) {
  const double pooled = static_cast<double>(k1 + k0) / static_cast<double>(n1 + n0);
  const double v = pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n0);
  if (v <= 0.0) return 0.0;
  return (static_cast<double>(k1) / n1 - static_cast<double>(k0) / n0) / std::sqrt(v);
}

// Exhaustive oracle: every outcome pair, dense uniform theta grid.
double brute_p(long k1, long n1, long k0, long n0, int points) {
  const double zobs = std::abs(z_direct(k1, n1, k0, n0));
  double best = 0.0;
  for (int g = 0; g < points; ++g) {
    const double t = 1e-6 + (1.0 - 2e-6) * g / (points - 1.0);
    double tail = 0.0;
    for (long a = 0; a <= n1; ++a)
      for (long b = 0; b <= n0; ++b)
        if (std::abs(z_direct(a, n1, b, n0)) >= zobs - 1e-12) tail += binom_pmf(a, n1, t) * binom_pmf(b, n0, t);
    best = std::max(best, tail);
  }
  return best;
}

}  // namespace

TEST_CASE("pooled Z") {
  CHECK(pooled_z(3, 10, 3, 10) == 0.0);
  CHECK(pooled_z(0, 7, 0, 9) == 0.0);
  CHECK(pooled_z(7, 7, 9, 9) == 0.0);
  CHECK(pooled_z(5, 5, 0, 5) == doctest::Approx(z_direct(5, 5, 0, 5)).epsilon(1e-14));
  CHECK(pooled_z(2, 9, 6, 11) == doctest::Approx(z_direct(2, 9, 6, 11)).epsilon(1e-14));
}

TEST_CASE("equal proportions give p = 1") {
  const auto r = ss_test(3, 10, 3, 10);
  CHECK(r.z_obs == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ss_test(0, 7, 0, 9).p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("5/5 vs 0/5 against exhaustive enumeration") {
  const auto r = ss_test(5, 5, 0, 5);
  const double oracle = brute_p(5, 5, 0, 5, 100000);
  CHECK(std::abs(r.p_value - oracle) < 1e-6);
  CHECK(r.theta_argsup > 0.0);
  CHECK(r.theta_argsup < 1.0);
}

TEST_CASE("other tables against enumeration") {
  for (const auto& [k1, n1, k0, n0] :
       std::vector<std::array<long, 4>>{{2, 6, 5, 7}, {1, 4, 4, 5}, {3, 8, 0, 3}, {6, 9, 2, 9}}) {
    const auto r = ss_test(k1, n1, k0, n0);
    CHECK(std::abs(r.p_value - brute_p(k1, n1, k0, n0, 20000)) < 1e-6);
  }
}

TEST_CASE("preconditions") {
  CHECK_THROWS(ss_test(6, 5, 0, 5));
  CHECK_THROWS(ss_test(1, 0, 0, 5));
  CHECK_THROWS(ss_test(1, 5, 0, 5, 50));
}

TEST_CASE("rejection probability") {
  CHECK(exact_rejection_prob(10, 10, 0.3, 0.0) == 0.0);

  // direct evaluation from per-table p-values
  double direct = 0.0;
  for (long a = 0; a <= 10; ++a)
    for (long b = 0; b <= 10; ++b)
      if (ss_test(a, 10, b, 10).p_value <= 0.05) direct += binom_pmf(a, 10, 0.3) * binom_pmf(b, 10, 0.3);
  const double r = exact_rejection_prob(10, 10, 0.3, 0.05);
  CHECK(r == doctest::Approx(direct).epsilon(1e-12));
  CHECK(r <= 0.05 + 1e-9);

  CHECK(exact_rejection_prob(15, 15, 0.2, 0.01) <= exact_rejection_prob(15, 15, 0.2, 0.05));
}

TEST_CASE("validity over theta") {
  for (const auto& [n1, n0] : std::vector<std::pair<long, long>>{{10, 10}, {15, 15}, {20, 10}})
    for (int i = 1; i <= 99; ++i) {
      const double theta = i / 100.0;
      CHECK(exact_rejection_prob(n1, n0, theta, 0.05) <= 0.05 + 1e-9);
    }
}

TEST_CASE("symmetry and relabeling") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 40; ++rep) {
    const long n1 = 1 + static_cast<long>(gen() % 15);
    const long n0 = 1 + static_cast<long>(gen() % 15);
    const long k1 = static_cast<long>(gen() % (n1 + 1));
    const long k0 = static_cast<long>(gen() % (n0 + 1));
    const double p = ss_test(k1, n1, k0, n0).p_value;
    CHECK(p >= 0.0);
    CHECK(p <= 1.0 + 1e-12);
    CHECK(std::abs(ss_test(k0, n0, k1, n1).p_value - p) < 1e-12);
    CHECK(std::abs(ss_test(n1 - k1, n1, n0 - k0, n0).p_value - p) < 1e-12);
  }
}

TEST_CASE("grid refinement is stable") {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 200; ++rep) {
    const long n1 = 1 + static_cast<long>(gen() % 20);
    const long n0 = 1 + static_cast<long>(gen() % 20);
    const long k1 = static_cast<long>(gen() % (n1 + 1));
    const long k0 = static_cast<long>(gen() % (n0 + 1));
    CHECK(std::abs(ss_test(k1, n1, k0, n0, 500).p_value - ss_test(k1, n1, k0, n0, 1000).p_value) < 1e-4);
  }
}

TEST_CASE("one-sided difference ordering") {
  // the observed extreme outcome of the lattice: only it has delta >= 1
  const auto r = ss_test(5, 5, 0, 5, kDefaultThetaGrid, Ordering::delta_one_sided);
  double best = 0.0;
  for (int g = 0; g < 20000; ++g) {
    const double t = 1e-6 + (1.0 - 2e-6) * g / 19999.0;
    best = std::max(best, binom_pmf(5, 5, t) * binom_pmf(0, 5, t));
  }
  CHECK(std::abs(r.p_value - best) < 1e-6);
  CHECK(std::abs(r.p_value - std::pow(0.5, 10)) < 1e-6);
  // one-sided p at the opposite corner is 1
  CHECK(ss_test(0, 5, 5, 5, kDefaultThetaGrid, Ordering::delta_one_sided).p_value ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cache returns the direct result") {
  ExactTestCache cache;
  const auto a = cache.get(4, 12, 1, 11);
  const auto b = cache.get(4, 12, 1, 11);
  CHECK(cache.size() == 1);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value == ss_test(4, 12, 1, 11).p_value);
}
