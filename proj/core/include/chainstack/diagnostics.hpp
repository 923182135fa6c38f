#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chainstack/draws.hpp"

namespace chainstack {

/// Split-R-hat of one series:
///   sqrt((S-2)/S + 2B/(S W)),
///   B = S * sum_m (mean_m - mean)^2,  W = sum_m sum_s (x - mean_m)^2 / (S - 2),
/// over the halves [0, floor(S/2)) and [floor(S/2), S). Requires S >= 4.
/// W == 0 gives +inf when the halves disagree and sqrt((S-2)/S) when they do not.
double split_rhat(std::span<const double> series);

/// The same statistic over J sequences (typically the halves of several
/// chains). With n the mean sequence length:
///   sqrt((n-1)/n + B/(n W)),  B = (4n/J) sum_j (mean_j - mean)^2,
///   W = sum_j sum_s (x - mean_j)^2 / (N - J).
/// Reduces to split_rhat for the two halves of one chain and is unchanged when
/// the list of sequences is duplicated.
double pooled_split_rhat(std::span<const std::span<const double>> sequences);

/// Effective sample size by Geyer's initial monotone positive sequence,
/// capped at S. Constant series report S. Requires S >= 8.
double chain_ess(std::span<const double> series);

/// Per-draw scalar summary of a chain used for mixing and ESS.
using SeriesChooser = std::function<std::vector<double>(const ChainDraws&)>;

/// Default summary: per-draw mean log predictive density (1/n) sum_i log_lik[s, i].
std::vector<double> mean_log_lik_series(const ChainDraws& chain);

/// Summary picking one parameter column by name; throws Contract when a chain lacks it.
SeriesChooser parameter_series(std::string name);

/// Symmetric M x M matrix of two-chain split-R-hat values: entry (j, k) pools
/// the halves of chains j and k; the diagonal is each chain's own split-R-hat.
Eigen::MatrixXd pairwise_mixing(const DrawSet& ds, const SeriesChooser& summary = mean_log_lik_series,
                                std::size_t threads = 1);

/// Partition of M chains into K clusters; labels are 0-based and numbered in
/// order of first appearance.
struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t n_clusters = 0;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Single-linkage clustering: chains j and k are linked when mix(j, k) < threshold.
ClusterAssignment cluster_chains(const Eigen::MatrixXd& mix, double threshold = 1.05);

/// Identity assignment (every chain its own cluster).
ClusterAssignment singleton_clusters(std::size_t m);

/// One chain per cluster, formed by row-concatenating the members in chain
/// order. Cluster ids are the member ids joined with '+'.
DrawSet merge_clusters(const DrawSet& ds, const ClusterAssignment& ca);

struct ChainDiagnostics {
  std::string chain_id;
  double split_rhat = 0.0;
  double ess = 0.0;
  std::size_t cluster = 0;
};

/// Split-R-hat and ESS of the chosen summary for every chain.
std::vector<ChainDiagnostics> diagnose_chains(const DrawSet& ds, const SeriesChooser& summary = mean_log_lik_series,
                                              std::size_t threads = 1);

/// Cluster ESS as the sum of its members' ESS.
std::vector<double> cluster_ess(std::span<const ChainDiagnostics> per_chain, const ClusterAssignment& ca);

}  // namespace chainstack
