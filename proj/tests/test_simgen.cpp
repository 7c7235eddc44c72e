#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "riskdiff/error.hpp"
#include "riskdiff/numerics.hpp"
#include "riskdiff/simgen.hpp"
#include "table2.hpp"

using namespace riskdiff;

namespace {

ScenarioParams params(double delta, double beta, long n = 30) {
  ScenarioParams p;
  p.n = n;
  p.delta = delta;
  p.beta_cov = beta;
  return p;
}

}  // namespace

TEST_CASE("marginal_mean") {
  CHECK(marginal_mean(0.4, -0.1, 0.0) == expit(0.3));
  CHECK(marginal_mean(logit(0.2), 0.0, 0.0) == doctest::Approx(0.2).epsilon(1e-14));
  const double l3 = std::log(3.0);
  const double b = 0.7;
  CHECK(marginal_mean(b, 0.2, l3) ==
        doctest::Approx((expit(b + 0.2) + 2 * expit(b + 0.2 + l3) + expit(b + 0.2 + 2 * l3)) / 4)
            .epsilon(1e-15));
}

TEST_CASE("solve_coefficients closed forms") {
  const auto c = solve_coefficients(params(0.3, 0.0));
  CHECK(std::abs(c.beta0 - logit(0.2)) < 1e-10);
  CHECK(std::abs(c.betaA - 1.3862944) < 1e-7);
  CHECK(std::abs(c.betaA - (logit(0.5) - logit(0.2))) < 1e-10);

  const auto z = solve_coefficients(params(0.0, std::log(3.0)));
  CHECK(std::abs(z.betaA) < 1e-10);

  const auto again = solve_coefficients(params(0.0, std::log(3.0)));
  CHECK(again.beta0 == z.beta0);
  CHECK(again.betaA == z.betaA);
}

TEST_CASE("solver preconditions") {
  CHECK_THROWS_AS(solve_coefficients(params(0.85, 0.0)), DomainError);
  auto p = params(0.1, 0.0);
  p.p0 = 1.1;
  CHECK_THROWS_AS(solve_coefficients(p), DomainError);
  // reachable in principle but not inside the bracket
  auto far = params(0.0, 0.0);
  far.p0 = 1e-12;
  CHECK_THROWS_AS(solve_coefficients(far), BracketError);
}

TEST_CASE("published cell probabilities") {
  for (const auto& row : table2::kRows) {
    CAPTURE(row.delta);
    CAPTURE(row.odds_ratio);
    const auto p = params(row.delta, std::log(row.odds_ratio));
    const auto c = solve_coefficients(p);
    CHECK(std::abs(c.achieved_p0 - 0.2) < 1e-10);
    CHECK(std::abs(c.achieved_delta - row.delta) < 1e-10);
    const auto cells = cell_probabilities(p, c);
    for (int x1 = 0; x1 < 2; ++x1)
      for (int a = 0; a < 2; ++a)
        for (int x2 = 0; x2 < 2; ++x2) CHECK(std::abs(cells[a][x1][x2] - row.cells[x1][a][x2]) <= table2::kTolerance);

    // marginal over arms and the other covariate at X1 = x
    double e[2];
    for (int x = 0; x < 2; ++x)
      e[x] = (cells[0][x][0] + cells[0][x][1] + cells[1][x][0] + cells[1][x][1]) / 4.0;
    CHECK(std::abs(e[0] - row.e_x0) <= table2::kTolerance);
    CHECK(std::abs(e[1] - row.e_x1) <= table2::kTolerance);
    CHECK(std::abs(e[1] - e[0] - row.rd_x) <= table2::kTolerance);
  }
}

TEST_CASE("gen_trial determinism and draw count") {
  const auto p = params(0.15, std::log(1.5), 40);
  const auto c = solve_coefficients(p);
  CounterRng a(5, 9);
  CounterRng b(5, 9);
  const auto d1 = gen_trial(p, c, a);
  const auto d2 = gen_trial(p, c, b);
  CHECK(a.draws() == 4 * 40);
  CHECK(std::equal(d1.y().begin(), d1.y().end(), d2.y().begin()));
  CHECK(std::equal(d1.arm().begin(), d1.arm().end(), d2.arm().begin()));
  CHECK(d1.covariate("X1").values == d2.covariate("X1").values);
  CHECK(d1.covariate("X2").values == d2.covariate("X2").values);

  // draw order: arm, x1, x2, y
  for (std::size_t i = 0; i < 40; ++i) {
    const double ua = CounterRng::uniform_at(5, 9, 4 * i);
    const double u1 = CounterRng::uniform_at(5, 9, 4 * i + 1);
    const double u2 = CounterRng::uniform_at(5, 9, 4 * i + 2);
    CHECK(d1.arm()[i] == (ua < 0.5 ? 1 : 0));
    CHECK(d1.covariate("X1").values[i] == (u1 < 0.5 ? 1.0 : 0.0));
    CHECK(d1.covariate("X2").values[i] == (u2 < 0.5 ? 1.0 : 0.0));
  }
}

TEST_CASE("law of large numbers") {
  const long n = 1000000;
  {
    const auto p = params(0.0, 0.0, n);
    CounterRng r(1, 1);
    const auto d = gen_trial(p, solve_coefficients(p), r);
    const double rate = static_cast<double>(d.responders(0) + d.responders(1)) / n;
    CHECK(std::abs(rate - 0.2) < 0.002);
  }
  {
    const auto p = params(0.30, std::log(3.0), n);
    CounterRng r(2, 2);
    const auto d = gen_trial(p, solve_coefficients(p), r);
    const double diff = static_cast<double>(d.responders(1)) / d.arm_size(1) -
                        static_cast<double>(d.responders(0)) / d.arm_size(0);
    CHECK(std::abs(diff - 0.30) < 0.003);
  }
}
