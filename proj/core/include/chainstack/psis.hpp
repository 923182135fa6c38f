#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "chainstack/draws.hpp"

namespace chainstack {

/// Generalized Pareto fit of a tail: shape k, scale sigma > 0, location mu
/// (the threshold the excesses were measured from).
struct GpdFit {
  double k = 0.0;
  double sigma = 1.0;
  double mu = 0.0;
};

/// Pareto-k value reported when a column is passed through unsmoothed.
inline constexpr double kSmoothingSkipped = -std::numeric_limits<double>::infinity();

/// Number of tail draws smoothed for S draws: min(ceil(0.2 S), ceil(3 sqrt(S))).
std::size_t psis_tail_length(std::size_t draws);

/// Profile-posterior-mean (Zhang-Stephens) estimate of (k, sigma) from
/// nonnegative excesses sorted ascending, with the weakly informative shrinkage
/// of k toward 0.5. Returns nullopt when the estimate is not finite.
std::optional<GpdFit> fit_gpd_excesses(std::span<const double> sorted_excesses);

/// Fits the `tail_count` largest values of x above the threshold formed by the
/// next-largest value (0 when x has no value below the tail). Returns nullopt
/// (smoothing skipped) when tail_count < 5 or the tail is constant.
std::optional<GpdFit> fit_gpd_tail(std::span<const double> x, std::size_t tail_count);

/// GPD quantile: mu + sigma * ((1 - p)^(-k) - 1) / k, with the k -> 0 limit.
double gpd_quantile(double p, const GpdFit& fit);

struct SmoothedColumn {
  std::vector<double> values;
  double khat = kSmoothingSkipped;
  bool smoothed() const noexcept { return khat != kSmoothingSkipped; }
};

/// Replaces the M largest raw ratios by GPD quantiles at (z - 0.5) / M,
/// z = 1..M, assigned in ascending order to the positions the tail held, then
/// truncates everything at max(raw). Unsmoothable columns come back unchanged.
SmoothedColumn smooth_column(std::span<const double> raw);

/// Leave-one-out importance ratios 1 / p(y_i | theta_s) of one chain, stored
/// shifted per column: ratios(s, i) = exp(-log_lik(s, i) - log_shift[i]) with
/// log_shift[i] = max_s(-log_lik(s, i)), so every column peaks at 1. The shift
/// cancels in the self-normalized LOO estimate.
struct RawRatios {
  Matrix ratios;
  Eigen::VectorXd log_shift;
};

RawRatios raw_ratios(const ChainDraws& chain);

/// Smoothed ratios r (on the shifted scale of RawRatios) and Pareto k per observation.
struct SmoothedRatios {
  Matrix r;
  Eigen::VectorXd khat;
};

SmoothedRatios smooth_ratios(const ChainDraws& chain, std::size_t threads = 1);

/// Per-cluster leave-one-out predictive densities, kept on the log scale.
struct LooMatrix {
  Matrix log_loo;  // [n x K], log p_k(y_i | y_-i)
  Matrix khat;     // [n x K]

  std::size_t n_obs() const noexcept { return static_cast<std::size_t>(log_loo.rows()); }
  std::size_t n_chains() const noexcept { return static_cast<std::size_t>(log_loo.cols()); }
  Matrix loo() const { return log_loo.array().exp().matrix(); }

  /// Columns in the given order (used for prefixes and duplication checks).
  LooMatrix select(std::span<const std::size_t> columns) const;
};

/// LOO density of one observation from one chain's log-likelihood column,
/// with its Pareto k.
struct LooPoint {
  double log_loo = 0.0;
  double khat = kSmoothingSkipped;
};

LooPoint loo_point(std::span<const double> log_lik_column);

/// PSIS-LOO for every (observation, chain). Throws NumericalFailure naming
/// (i, k) when an entry is not a positive finite density.
LooMatrix loo_matrix(const DrawSet& ds, std::size_t threads = 1);

/// Counts of Pareto k values in the bins (-inf, 0.5], (0.5, 0.7], (0.7, 1], (1, inf).
struct KhatSummary {
  static constexpr std::array<std::string_view, 4> labels{"good", "ok", "bad", "very bad"};
  static constexpr std::array<std::string_view, 4> ranges{"(-Inf, 0.5]", "(0.5, 0.7]", "(0.7, 1]", "(1, Inf)"};
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;

  double proportion(std::size_t bin) const {
    return total ? static_cast<double>(counts.at(bin)) / static_cast<double>(total) : 0.0;
  }
};

KhatSummary summarize_khat(const Matrix& khat);

}  // namespace chainstack
