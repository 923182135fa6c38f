#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chainstack/draws.hpp"
#include "chainstack/stacking.hpp"

namespace chainstack {

/// Clustered draws with one weight per cluster; draw s of cluster k carries w_k / S_k.
class WeightedDrawSet {
 public:
  WeightedDrawSet(DrawSet clusters, ChainWeights weights);

  const DrawSet& clusters() const noexcept { return clusters_; }
  const ChainWeights& weights() const noexcept { return weights_; }
  double draw_weight(std::size_t cluster) const;

  /// floor(min over clusters with w_k > 0 of S_k / w_k): the largest admissible thinned size.
  std::size_t max_thin_size() const;

 private:
  DrawSet clusters_;
  ChainWeights weights_;
};

/// sum_k sum_s (w_k / S_k) h[k][s].
double weighted_expectation(const WeightedDrawSet& wds, std::span<const EstimandSeries> h);

/// Draws taken from each cluster and the (sorted, distinct) row indices chosen.
struct ResamplePlan {
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> indices;
};

/// Quasi-Monte-Carlo thinning to s_thin unweighted draws. Cluster k first
/// receives floor(s_thin w_k) draws; the remaining draws go to at most one
/// extra per cluster, chosen by systematic sampling over the residual masses
/// s_thin w_k - floor(s_thin w_k). Rows are chosen uniformly without
/// replacement inside each cluster. Throws BoundViolation naming the binding
/// cluster when s_thin > S_k / w_k for some k with w_k > 0.
ResamplePlan thin_resample(const WeightedDrawSet& wds, std::size_t s_thin, std::uint64_t seed);

/// Concatenates the planned rows cluster by cluster into one unweighted chain.
ChainDraws materialize(const WeightedDrawSet& wds, const ResamplePlan& plan);

}  // namespace chainstack
