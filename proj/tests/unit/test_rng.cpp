#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "chainstack/rng.hpp"

using chainstack::CounterRng;

TEST_CASE("counter stream matches the SplitMix64 reference sequence") {
  // Published SplitMix64 outputs for seed 1234567.
  CounterRng rng(1234567);
  CHECK(rng.next_u64() == 0x599ED017FB08FC85ULL);
  CHECK(rng.next_u64() == 0x2C73F08458540FA5ULL);
  CHECK(rng.next_u64() == 0x883EBCE5A3F27C77ULL);
  CHECK(rng.draws_taken() == 3);
}

TEST_CASE("same seed gives the same stream; derived seeds differ") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 1000; ++s) seeds.push_back(chainstack::derive_seed(7, s));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(chainstack::derive_seed(7, 0) != chainstack::derive_seed(8, 0));
}

TEST_CASE("uniform variates stay in range with the right mean") {
  CounterRng rng(3);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double o = rng.uniform_open();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(o > 0.0);
    REQUIRE(o < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("below is uniform over its range") {
  CounterRng rng(11);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.46);  // 0.999 quantile of chi-square with 6 df
}

TEST_CASE("normal and Cauchy variates have the expected location and spread") {
  CounterRng rng(5);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    c[static_cast<std::size_t>(i)] = rng.cauchy(3.0, 2.0);
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
  std::sort(c.begin(), c.end());
  CHECK(c[n / 2] == doctest::Approx(3.0).epsilon(0.01));
  // Quartiles of Cauchy(3, 2) are 3 -+ 2.
  CHECK(c[n / 4] == doctest::Approx(1.0).epsilon(0.03));
  CHECK(c[3 * n / 4] == doctest::Approx(5.0).epsilon(0.01));
}
