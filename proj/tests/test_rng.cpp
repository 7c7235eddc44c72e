#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "riskdiff/rng.hpp"

using namespace riskdiff;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("draws are a pure function of seed, stream and index") {
  CounterRng a(42, 7);
  CounterRng b(42, 7);
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    xs.push_back(u);
  }
  CHECK(a.draws() == 100);
  CHECK(CounterRng::uniform_at(42, 7, 37) == xs[37]);

  CounterRng other_stream(42, 8);
  CounterRng other_seed(43, 7);
  CHECK(other_stream.uniform() != xs[0]);
  CHECK(other_seed.uniform() != xs[0]);
}

TEST_CASE("uniform moments") {
  CounterRng r(1, 2);
  const int n = 200000;
  double s = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    s += u;
    s2 += u * u;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  // 5 standard errors
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(var - 1.0 / 12.0) < 5.0 * std::sqrt(1.0 / 180.0 / n));
}

TEST_CASE("below covers its range uniformly") {
  CounterRng r(9, 9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  // 6 df, 99.9th percentile 22.46
  CHECK(chi2 < 22.46);
}

TEST_CASE("stream keys") {
  CHECK(stream_key({1, 2}) == stream_key({1, 2}));
  CHECK(stream_key({1, 2}) != stream_key({2, 1}));
  CHECK(stream_key({1}) != stream_key({1, 0}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(stream_key({5, i}));
  CHECK(seen.size() == 1000);

  // FNV-1a reference values
  CHECK(hash_string("") == 0xcbf29ce484222325ull);
  CHECK(hash_string("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hash_string("foobar") == 0x85944171f73967e8ull);
}
