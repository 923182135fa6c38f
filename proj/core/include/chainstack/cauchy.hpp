#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "chainstack/draws.hpp"
#include "chainstack/rng.hpp"
#include "chainstack/stacking.hpp"

/// Cauchy location model fitted to a two-component Cauchy mixture: data
/// y ~ p0 Cauchy(a, 1) + (1 - p0) Cauchy(-a, 1), model y ~ Cauchy(mu, 1) with
/// a flat prior. Closed-form large-n posterior geometry, predictive-density
/// limits, and a sampler that produces deliberately non-mixing chains.
namespace chainstack::cauchy {

struct Scenario {
  double a = 10.0;        // half-distance between the component centers
  double p0 = 0.5;        // probability of the right component, in [0.5, 1]
  std::size_t n = 100;    // observations
  std::uint64_t seed = 1;

  void validate() const;
};

/// n iid draws from the mixture; z_i ~ Bernoulli(p0) picks +a or -a.
std::vector<double> generate_data(const Scenario& sc);

/// Limit of the per-observation log posterior kernel,
///   h(mu) = -int log(1 + (y - mu)^2) [p0/((y-a)^2+1) + (1-p0)/((y+a)^2+1)] dy
///         = -pi [p0 log(4 + (mu-a)^2) + (1-p0) log(4 + (mu+a)^2)].
double h_value(double mu, double a, double p0);

/// dh/dmu = -2 pi [p0 (mu-a)/((mu-a)^2+4) + (1-p0)(mu+a)/((mu+a)^2+4)].
double h_prime(double mu, double a, double p0);

double h_second(double mu, double a, double p0);

/// Coefficients (mu^3, mu^2, mu^1, mu^0) of the cubic g whose sign is the
/// sign of h'(mu):
///   g = -mu^3 + (a - 2ap0) mu^2 + (a^2 - 4) mu - 4a - a^3 + 8ap0 + 2a^3 p0.
std::array<double, 4> mode_cubic(double a, double p0);

/// Coefficients (x^4 .. x^0) of the quartic whose roots bound the bimodal region.
std::array<double, 5> boundary_quartic(double a);

/// Bimodality boundary for a > 2: the posterior is asymptotically bimodal
/// iff p0 < xi(a). xi is the root of boundary_quartic lying in [0.5, 1)
/// (third in ascending order), found from companion-matrix eigenvalues and
/// polished by Newton steps. Throws Domain for a <= 2.
double xi(double a);

/// Local maxima of h in ascending order.
struct ModeReport {
  std::vector<double> modes;
  bool bimodal = false;
};

ModeReport limiting_modes(double a, double p0);

/// Point the exact posterior concentrates on: the higher mode of h, taking the
/// right mode on ties (p0 = 0.5).
double concentration_point(double a, double p0);

/// KL(Cauchy(mu1, sigma) || Cauchy(mu2, sigma)) = log(1 + (mu1 - mu2)^2 / (4 sigma^2)).
double kl_cauchy(double mu1, double mu2, double sigma);

/// Large-n elpd of the exact posterior:
///   -(p0 log(pi (4 + (g - a)^2)) + (1 - p0) log(pi (4 + (g + a)^2))), g = concentration_point.
double elpd_bayes_limit(double a, double p0);

/// Expected log density of a Cauchy(loc, 1) mixture under the data process,
/// by adaptive Gauss-Kronrod on y = tan(theta); absolute tolerance 1e-6.
double elpd_mixture(double a, double p0, const ChainWeights& w, std::span<const double> locs);

/// Negative entropy of the data process (elpd of the true density).
double elpd_true(double a, double p0);

struct MixtureOptimum {
  ChainWeights weights;
  double elpd = 0.0;
};

/// Weights maximizing elpd_mixture for fixed locations, via the simplex optimizer.
MixtureOptimum optimal_mixture(double a, double p0, std::span<const double> locs);

inline double log_lik(double y, double mu) {
  return -std::log(std::numbers::pi) - std::log1p((y - mu) * (y - mu));
}

/// Generic Metropolis walk: `propose(state, rng)` must be symmetric;
/// `record(state, s)` sees every retained state. Returns the acceptance count.
template <class State, class LogTarget, class Propose, class Record>
std::size_t metropolis(State state, std::size_t steps, LogTarget&& log_target, Propose&& propose, Record&& record,
                       CounterRng& rng) {
  double current = log_target(state);
  std::size_t accepted = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    State candidate = propose(state, rng);
    const double proposed = log_target(candidate);
    const double u = rng.uniform_open();
    if (proposed - current >= 0.0 || std::log(u) < proposed - current) {
      state = std::move(candidate);
      current = proposed;
      ++accepted;
    }
    record(state, s);
  }
  return accepted;
}

struct MetropolisResult {
  ChainDraws chain;
  double acceptance_rate = 0.0;
};

/// Random-walk Metropolis on the flat-prior posterior
/// log p(mu | y) = -sum_i log(1 + (y_i - mu)^2) with N(0, step^2) proposals.
/// `warmup` draws are discarded; `draws` are kept with params column "mu" and
/// the full pointwise log-likelihood matrix.
MetropolisResult rw_metropolis(std::span<const double> data, double init, std::size_t draws, double step,
                               std::uint64_t seed, std::string chain_id = "chain", std::size_t warmup = 0);

/// Normalized posterior masses on a sorted grid under the flat prior, each node
/// carrying half the distance to its neighbours. Throws NumericalFailure if the
/// normalization is not finite.
std::vector<double> grid_posterior(std::span<const double> data, std::span<const double> mu_grid);

struct SimulationSettings {
  std::size_t chains = 8;
  std::size_t draws = 4000;
  std::size_t warmup = 500;
  double step = 0.5;
  std::size_t threads = 1;
};

struct SimulatedRun {
  Scenario scenario;
  std::vector<double> data;
  std::vector<double> inits;
  std::vector<double> acceptance;
  DrawSet draws;
};

/// Data plus `chains` independent samplers started alternately at +a and -a,
/// chain c seeded with derive_seed(seed, c + 1).
SimulatedRun simulate(const Scenario& sc, const SimulationSettings& settings);

}  // namespace chainstack::cauchy
