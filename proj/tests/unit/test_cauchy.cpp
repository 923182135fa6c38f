#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include "chainstack/cauchy.hpp"
#include "chainstack/error.hpp"

using namespace chainstack;
using namespace chainstack::cauchy;

namespace {

constexpr double kPi = std::numbers::pi;

/// Whole-line quadrature, independent of the library's tan-substitution rule.
template <class F>
double integrate_line(F&& f) {
  static boost::math::quadrature::sinh_sinh<double> rule(12);
  return rule.integrate(f, 1e-13);
}

double cauchy_pdf(double y, double loc) { return 1.0 / (kPi * (1.0 + (y - loc) * (y - loc))); }

double process_pdf(double y, double a, double p0) {
  return p0 * cauchy_pdf(y, a) + (1.0 - p0) * cauchy_pdf(y, -a);
}

/// h(mu) from its defining integral.
double h_by_quadrature(double mu, double a, double p0) {
  return -integrate_line([&](double y) {
    return std::log1p((y - mu) * (y - mu)) * (p0 / ((y - a) * (y - a) + 1.0) + (1.0 - p0) / ((y + a) * (y + a) + 1.0));
  });
}

/// Discriminant of the cubic g from its coefficients (positive iff three distinct real roots).
double cubic_discriminant(double a, double p0) {
  const auto c = mode_cubic(a, p0);
  const double A = c[0], B = c[1], C = c[2], D = c[3];
  return 18 * A * B * C * D - 4 * B * B * B * D + B * B * C * C - 4 * A * C * C * C - 27 * A * A * D * D;
}

double quartic_at(double a, double x) {
  double v = 0.0;
  for (double coef : boundary_quartic(a)) v = v * x + coef;
  return v;
}

/// Local maxima of the quadrature-evaluated h on a grid, refined by golden section.
std::vector<double> grid_modes(double a, double p0) {
  std::vector<double> mu, h;
  for (double m = -2.0 * a - 2.0; m <= 2.0 * a + 2.0; m += 0.05) {
    mu.push_back(m);
    h.push_back(h_by_quadrature(m, a, p0));
  }
  std::vector<double> modes;
  for (std::size_t j = 1; j + 1 < mu.size(); ++j) {
    if (!(h[j] > h[j - 1] && h[j] >= h[j + 1])) continue;
    double lo = mu[j - 1], hi = mu[j + 1];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
      const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      if (h_by_quadrature(x1, a, p0) > h_by_quadrature(x2, a, p0)) hi = x2;
      else lo = x1;
    }
    modes.push_back(0.5 * (lo + hi));
  }
  return modes;
}

}  // namespace

TEST_CASE("data generation") {
  CHECK(generate_data({10.0, 0.5, 0, 1}).empty());
  auto right = generate_data({10.0, 1.0, 10000, 2});
  std::nth_element(right.begin(), right.begin() + 5000, right.end());
  CHECK(std::abs(right[5000] - 10.0) < 3.0 * (kPi / 2.0) / std::sqrt(10000.0));
  auto both = generate_data({10.0, 0.5, 10000, 3});
  const auto pos = std::count_if(both.begin(), both.end(), [](double y) { return y > 0.0; });
  CHECK(pos >= 4700);
  CHECK(pos <= 5300);
  CHECK(generate_data({10.0, 0.5, 50, 9}) == generate_data({10.0, 0.5, 50, 9}));
  CHECK_THROWS_AS(generate_data({-1.0, 0.5, 5, 1}), Error);
  CHECK_THROWS_AS(generate_data({1.0, 0.4, 5, 1}), Error);
}

TEST_CASE("closed-form h matches its defining integral") {
  for (double a : {1.0, 3.0, 10.0})
    for (double p0 : {0.5, 0.7, 0.9})
      for (double mu : {-2.0 * a, -0.5 * a, 0.0, 0.3 * a, a, 2.0 * a})
        CHECK(h_value(mu, a, p0) == doctest::Approx(h_by_quadrature(mu, a, p0)).epsilon(1e-10));
}

TEST_CASE("h' matches a finite difference of the quadrature h") {
  const double d = 1e-3;
  for (double a : {1.0, 3.0, 10.0})
    for (double p0 : {0.5, 0.7, 0.9})
      for (int j = 0; j <= 8; ++j) {
        const double mu = -2.0 * a + j * (a / 2.0);
        const double fd = (h_by_quadrature(mu + d, a, p0) - h_by_quadrature(mu - d, a, p0)) / (2.0 * d);
        CHECK(std::abs(h_prime(mu, a, p0) - fd) < 1e-6);
        const double fd2 = (h_prime(mu + d, a, p0) - h_prime(mu - d, a, p0)) / (2.0 * d);
        CHECK(std::abs(h_second(mu, a, p0) - fd2) < 1e-5);
      }
}

TEST_CASE("h' zeros in the symmetric case") {
  for (double a : {3.0, 5.0, 10.0}) {
    CHECK(std::abs(h_prime(0.0, a, 0.5)) < 1e-15);
    const double g = std::sqrt(a * a - 4.0);
    CHECK(std::abs(h_prime(g, a, 0.5)) < 1e-12);
    CHECK(std::abs(h_prime(-g, a, 0.5)) < 1e-12);
  }
}

TEST_CASE("the mode cubic has the sign of h'") {
  for (double a : {1.5, 4.0, 10.0})
    for (double p0 : {0.5, 0.65, 0.95})
      for (double mu = -3.0 * a; mu <= 3.0 * a; mu += a / 7.0) {
        const auto c = mode_cubic(a, p0);
        const double g = ((c[0] * mu + c[1]) * mu + c[2]) * mu + c[3];
        if (std::abs(g) > 1e-9) CHECK((g > 0.0) == (h_prime(mu, a, p0) > 0.0));
      }
}

TEST_CASE("the boundary quartic is the cubic discriminant up to a factor 64") {
  for (double a : {2.5, 3.0, 5.0, 10.0, 31.0})
    for (double p0 : {0.5, 0.6, 0.77, 0.9, 1.0})
      CHECK(cubic_discriminant(a, p0) == doctest::Approx(64.0 * quartic_at(a, p0)).epsilon(1e-10));
}

TEST_CASE("bimodality boundary") {
  CHECK(std::abs(xi(2.0 + 1e-6) - 0.5) < 1e-3);
  CHECK(xi(1e6) > 0.999);
  CHECK(xi(10.0) == doctest::Approx(0.8207773519647361).epsilon(1e-12));
  CHECK_THROWS_AS(xi(2.0), Error);
  CHECK_THROWS_AS(xi(1.0), Error);
  double prev = 0.0;
  for (int j = 0; j < 50; ++j) {
    const double a = 2.1 + (100.0 - 2.1) * j / 49.0;
    const double x = xi(a);
    CHECK(x >= 0.5);
    CHECK(x < 1.0);
    CHECK(x > prev);
    CHECK(std::abs(quartic_at(a, x)) <= 1e-9 * std::abs(boundary_quartic(a)[0]));
    prev = x;
  }
  for (double a : {3.0, 5.0, 10.0}) {
    const double x = xi(a);
    CHECK(cubic_discriminant(a, x - 1e-8) > 0.0);
    CHECK(cubic_discriminant(a, x + 1e-8) < 0.0);
  }
}

TEST_CASE("limiting modes") {
  auto sym = limiting_modes(10.0, 0.5);
  REQUIRE(sym.modes.size() == 2);
  CHECK(sym.bimodal);
  CHECK(std::abs(sym.modes[0] + std::sqrt(96.0)) < 1e-9);
  CHECK(std::abs(sym.modes[1] - std::sqrt(96.0)) < 1e-9);

  auto centre = limiting_modes(1.5, 0.5);
  REQUIRE(centre.modes.size() == 1);
  CHECK(std::abs(centre.modes[0]) < 1e-12);
  CHECK_FALSE(centre.bimodal);

  auto lopsided = limiting_modes(10.0, 0.99);
  REQUIRE(lopsided.modes.size() == 1);
  auto oracle = grid_modes(10.0, 0.99);
  REQUIRE(oracle.size() == 1);
  CHECK(lopsided.modes[0] == doctest::Approx(oracle[0]).epsilon(1e-6));
  CHECK(std::abs(lopsided.modes[0] - 10.0) < 0.1);

  auto skew = limiting_modes(5.0, 0.6);
  auto skew_oracle = grid_modes(5.0, 0.6);
  REQUIRE(skew.modes.size() == skew_oracle.size());
  for (std::size_t j = 0; j < skew.modes.size(); ++j) CHECK(skew.modes[j] == doctest::Approx(skew_oracle[j]).epsilon(1e-6));
}

TEST_CASE("modes are exactly the downward zero crossings of h'") {
  for (double a : {1.0, 2.5, 3.0, 6.0, 10.0})
    for (double p0 : {0.5, 0.55, 0.6, 0.7, 0.85, 1.0}) {
      std::vector<double> crossings;
      const double step = 1e-3;
      for (double mu = -3.0 * a; mu < 3.0 * a; mu += step)
        if (h_prime(mu, a, p0) > 0.0 && h_prime(mu + step, a, p0) <= 0.0) crossings.push_back(mu);
      auto r = limiting_modes(a, p0);
      REQUIRE(r.modes.size() == crossings.size());
      for (std::size_t j = 0; j < crossings.size(); ++j) CHECK(std::abs(r.modes[j] - crossings[j]) < 2e-3);
      CHECK(std::is_sorted(r.modes.begin(), r.modes.end()));
      CHECK(r.bimodal == (r.modes.size() == 2));
      CHECK(r.bimodal == (a > 2.0 && p0 < xi(a)));
      if (p0 == 0.5 && r.bimodal) CHECK(r.modes[0] == doctest::Approx(-r.modes[1]).epsilon(1e-12));
    }
}

TEST_CASE("Cauchy KL divergence") {
  CHECK(kl_cauchy(3.0, 3.0, 2.0) == 0.0);
  CHECK(kl_cauchy(1.0, -4.0, 0.5) == kl_cauchy(-4.0, 1.0, 0.5));
  CHECK(kl_cauchy(10.0, -10.0, 1.0) == doctest::Approx(std::log(101.0)).epsilon(1e-14));
  const double oracle = integrate_line([](double y) {
    const double p = cauchy_pdf(y, 10.0), q = cauchy_pdf(y, -10.0);
    return p * std::log(p / q);
  });
  CHECK(std::abs(kl_cauchy(10.0, -10.0, 1.0) - oracle) < 1e-4);
  CHECK_THROWS_AS(kl_cauchy(0.0, 1.0, 0.0), Error);
}

TEST_CASE("limiting elpd of the exact posterior") {
  const double approx = -0.5 * std::log(1.0 + 400.0) - std::log(4.0 * kPi);
  CHECK(std::abs(elpd_bayes_limit(20.0, 0.5) - approx) < 0.02);
  CHECK(elpd_bayes_limit(10.0, 1.0) == doctest::Approx(-std::log(4.0 * kPi)).epsilon(1e-12));
  for (auto [a, p0] : {std::pair{10.0, 0.5}, {10.0, 0.6}, {5.0, 0.7}, {1.5, 0.5}}) {
    const double gamma = concentration_point(a, p0);
    const double oracle = integrate_line([&](double y) { return process_pdf(y, a, p0) * std::log(cauchy_pdf(y, gamma)); });
    CHECK(std::abs(elpd_bayes_limit(a, p0) - oracle) < 1e-4);
  }
  CHECK(concentration_point(10.0, 0.5) > 0.0);
  CHECK(concentration_point(10.0, 0.6) == doctest::Approx(limiting_modes(10.0, 0.6).modes.back()));
}

TEST_CASE("elpd of Cauchy mixtures") {
  const double g = std::sqrt(96.0);
  const std::vector<double> locs{-g, g};
  CHECK(elpd_mixture(10.0, 0.5, ChainWeights({0.0, 1.0}), locs) ==
        doctest::Approx(elpd_bayes_limit(10.0, 0.5)).epsilon(1e-9));
  const double half = elpd_mixture(10.0, 0.5, uniform_weights(2), locs);
  CHECK(half > elpd_bayes_limit(10.0, 0.5));
  const double oracle = integrate_line([&](double y) {
    return process_pdf(y, 10.0, 0.5) * std::log(0.5 * cauchy_pdf(y, -g) + 0.5 * cauchy_pdf(y, g));
  });
  CHECK(std::abs(half - oracle) < 1e-6);
  const double truth = elpd_true(10.0, 0.5);
  const auto opt = optimal_mixture(10.0, 0.5, locs);
  CHECK(truth - opt.elpd < 0.05);
  CHECK(truth >= opt.elpd);
  CHECK_THROWS_AS(elpd_mixture(10.0, 0.5, uniform_weights(3), locs), Error);
}

TEST_CASE("optimal mixture weights match a grid search on the exact elpd") {
  for (auto [a, p0] : {std::pair{10.0, 0.6}, {5.0, 0.55}}) {
    const auto modes = limiting_modes(a, p0).modes;
    REQUIRE(modes.size() == 2);
    const auto opt = optimal_mixture(a, p0, modes);
    double best_w = 0.0, best = -1e300;
    for (int j = 1; j < 1000; ++j) {
      const double w = j / 1000.0;
      const double v = elpd_mixture(a, p0, ChainWeights({1.0 - w, w}), modes);
      if (v > best) {
        best = v;
        best_w = w;
      }
    }
    CHECK(std::abs(opt.weights[1] - best_w) < 1e-3);
    CHECK(opt.elpd >= best - 1e-9);
  }
}

TEST_CASE("Metropolis on a flat target accepts every move") {
  auto r = rw_metropolis({}, 0.0, 500, 0.5, 1);
  CHECK(r.acceptance_rate == 1.0);
  CHECK(r.chain.n_obs() == 0);
  CHECK_THROWS_AS(rw_metropolis({}, 0.0, 1, 0.5, 1), Error);
}

TEST_CASE("generic Metropolis has the right stationary law on three states") {
  const std::array<double, 3> target{0.2, 0.3, 0.5};
  std::array<std::size_t, 3> visits{};
  CounterRng rng(17);
  auto log_target = [&](int s) { return std::log(target[static_cast<std::size_t>(s)]); };
  auto propose = [](int s, CounterRng& r) { return (s + (r.uniform() < 0.5 ? 1 : 2)) % 3; };
  auto record = [&](int s, std::size_t) { ++visits[static_cast<std::size_t>(s)]; };
  const std::size_t steps = 1000000;
  metropolis(0, steps, log_target, propose, record, rng);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(static_cast<double>(visits[j]) / steps - target[j]) < 0.01 * target[j]);
}

TEST_CASE("a chain started at the right mode stays there") {
  const auto data = generate_data({10.0, 0.5, 100, 5});
  auto r = rw_metropolis(data, 10.0, 4000, 0.5, 77, "right", 500);
  const auto& mu = r.chain.params()->values;
  CHECK(r.chain.params()->names == std::vector<std::string>{"mu"});
  CHECK((mu.array() > 0.0).all());
  std::vector<double> grid;
  for (double m = 0.0; m <= 20.0; m += 0.001) grid.push_back(m);
  auto mass = grid_posterior(data, grid);
  double mean = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) mean += mass[j] * grid[j];
  CHECK(std::abs(mu.mean() - mean) < 1.0);
  const Eigen::Index s = 123, i = 7;
  CHECK(r.chain.log_lik()(s, i) == doctest::Approx(log_lik(data[static_cast<std::size_t>(i)], mu(s, 0))).epsilon(1e-15));
}

TEST_CASE("grid posterior") {
  std::vector<double> grid;
  for (int j = -2000; j < 2000; ++j) grid.push_back((j + 0.5) * 0.01);
  auto mass = grid_posterior(std::vector<double>{0.0}, grid);
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  CHECK(std::abs(total - 1.0) < 1e-12);
  double right = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (grid[j] > 0.0) right += mass[j];
  CHECK(right == doctest::Approx(0.5).epsilon(1e-12));

  // Separated modes put almost all mass on one side for most data sets.
  std::vector<double> wide;
  for (double m = -30.0; m <= 30.0; m += 0.001) wide.push_back(m);
  int one_sided = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto m2 = grid_posterior(generate_data({10.0, 0.5, 100, seed}), wide);
    double pos = 0.0;
    for (std::size_t j = 0; j < wide.size(); ++j)
      if (wide[j] > 0.0) pos += m2[j];
    if (pos > 1.0 - 1e-4 || pos < 1e-4) ++one_sided;
  }
  CHECK(one_sided == 26);
  const auto data = generate_data({10.0, 0.5, 100, 1});
  CHECK_THROWS_AS(grid_posterior(data, std::vector<double>{1.0}), Error);
}

TEST_CASE("simulation is reproducible and independent of the worker count") {
  Scenario sc{10.0, 0.5, 30, 11};
  SimulationSettings one;
  one.chains = 4;
  one.draws = 200;
  one.warmup = 50;
  auto many = one;
  many.threads = 3;
  auto a = simulate(sc, one);
  auto b = simulate(sc, many);
  CHECK(a.inits == std::vector<double>{10.0, -10.0, 10.0, -10.0});
  REQUIRE(a.draws.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a.draws.chain(k).log_lik() == b.draws.chain(k).log_lik());
    CHECK(a.draws.chain(k).chain_id() == "chain" + std::to_string(k + 1));
  }
  CHECK(a.acceptance == b.acceptance);
}
