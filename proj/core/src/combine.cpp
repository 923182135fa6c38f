#include "chainstack/combine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "chainstack/error.hpp"
#include "chainstack/rng.hpp"

namespace chainstack {

namespace {
constexpr const char* kModule = "combine";
constexpr double kBoundSlack = 1e-9;
}

WeightedDrawSet::WeightedDrawSet(DrawSet clusters, ChainWeights weights)
    : clusters_(std::move(clusters)), weights_(std::move(weights)) {
  if (weights_.size() != clusters_.size())
    throw Error(ErrorCode::dimension_mismatch, kModule,
                std::to_string(weights_.size()) + " weights for " + std::to_string(clusters_.size()) + " clusters");
}

double WeightedDrawSet::draw_weight(std::size_t cluster) const {
  return weights_[cluster] / static_cast<double>(clusters_.chain(cluster).draws());
}

std::size_t WeightedDrawSet::max_thin_size() const {
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clusters_.size(); ++k)
    if (weights_[k] > 0.0) bound = std::min(bound, static_cast<double>(clusters_.chain(k).draws()) / weights_[k]);
  return static_cast<std::size_t>(std::floor(bound * (1.0 + kBoundSlack)));
}

double weighted_expectation(const WeightedDrawSet& wds, std::span<const EstimandSeries> h) {
  const auto& ds = wds.clusters();
  if (h.size() != ds.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "one estimand series per cluster is required");
  double total = 0.0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (h[k].size() != ds.chain(k).draws())
      throw Error(ErrorCode::dimension_mismatch, kModule, "estimand length differs from cluster draw count")
          .at("cluster " + std::to_string(k));
    for (double v : h[k])
      if (!std::isfinite(v)) throw Error(ErrorCode::contract, kModule, "estimand values must be finite");
    const double sum = std::accumulate(h[k].begin(), h[k].end(), 0.0);
    total += wds.weights()[k] * sum / static_cast<double>(h[k].size());
  }
  return total;
}

ResamplePlan thin_resample(const WeightedDrawSet& wds, std::size_t s_thin, std::uint64_t seed) {
  const auto& ds = wds.clusters();
  const auto& w = wds.weights();
  const std::size_t k_count = ds.size();
  const double target = static_cast<double>(s_thin);

  for (std::size_t k = 0; k < k_count; ++k) {
    if (w[k] <= 0.0) continue;
    const double size = static_cast<double>(ds.chain(k).draws());
    if (target * w[k] > size * (1.0 + kBoundSlack))
      throw Error(ErrorCode::bound_violation, kModule,
                  "s_thin = " + std::to_string(s_thin) + " exceeds S_k / w_k = " + std::to_string(size / w[k]))
          .at("cluster " + std::to_string(k) + " (" + ds.chain(k).chain_id() + ")");
  }

  ResamplePlan plan;
  plan.counts.assign(k_count, 0);
  plan.indices.resize(k_count);
  std::vector<double> residual(k_count, 0.0);
  std::size_t fixed_total = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double exact = target * w[k];
    auto fixed = static_cast<std::size_t>(std::floor(exact + kBoundSlack));
    fixed = std::min(fixed, ds.chain(k).draws());
    plan.counts[k] = fixed;
    residual[k] = std::max(0.0, exact - static_cast<double>(fixed));
    fixed_total += fixed;
  }

  CounterRng allocation_rng(derive_seed(seed, 0));
  const std::size_t remaining = s_thin > fixed_total ? s_thin - fixed_total : 0;
  if (remaining > 0) {
    // Systematic pass over the residual masses rescaled to total `remaining`;
    // each mass is below 1, so no cluster gains more than one draw.
    const double mass = std::accumulate(residual.begin(), residual.end(), 0.0);
    const double scale = mass > 0.0 ? static_cast<double>(remaining) / mass : 0.0;
    double pointer = allocation_rng.uniform();
    double cumulative = 0.0;
    std::size_t given = 0;
    for (std::size_t k = 0; k < k_count && given < remaining; ++k) {
      cumulative += residual[k] * scale;
      while (given < remaining && pointer < cumulative) {
        if (plan.counts[k] < ds.chain(k).draws()) ++plan.counts[k];
        ++given;
        pointer += 1.0;
      }
    }
    // Rounding can leave the final pointer past the last cumulative mass.
    for (std::size_t k = k_count; given < remaining && k-- > 0;)
      if (residual[k] > 0.0 && plan.counts[k] < ds.chain(k).draws()) {
        ++plan.counts[k];
        ++given;
      }
  }

  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t size = ds.chain(k).draws();
    CounterRng rng(derive_seed(seed, k + 1));
    std::vector<std::size_t> pool(size);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const std::size_t take = plan.counts[k];
    for (std::size_t j = 0; j < take; ++j) {
      const auto pick = j + static_cast<std::size_t>(rng.below(size - j));
      std::swap(pool[j], pool[pick]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    plan.indices[k] = std::move(pool);
  }
  return plan;
}

ChainDraws materialize(const WeightedDrawSet& wds, const ResamplePlan& plan) {
  const auto& ds = wds.clusters();
  if (plan.counts.size() != ds.size() || plan.indices.size() != ds.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "plan does not match cluster count");
  std::size_t total = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (plan.indices[k].size() != plan.counts[k])
      throw Error(ErrorCode::contract, kModule, "plan counts and indices disagree").at("cluster " + std::to_string(k));
    total += plan.counts[k];
  }
  const auto n = static_cast<Eigen::Index>(ds.n_obs());
  bool with_params = true;
  Eigen::Index p_cols = -1;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (plan.counts[k] == 0) continue;
    const auto& p = ds.chain(k).params();
    if (!p || (p_cols >= 0 && p->values.cols() != p_cols)) with_params = false;
    if (p) p_cols = p->values.cols();
  }
  with_params = with_params && p_cols >= 0;

  Matrix ll(static_cast<Eigen::Index>(total), n);
  std::optional<ParamTable> params;
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& chain = ds.chain(k);
    if (with_params && plan.counts[k] > 0 && !params)
      params = ParamTable{chain.params()->names, Matrix(static_cast<Eigen::Index>(total), p_cols)};
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (auto s : plan.indices[k]) {
      if (s >= chain.draws() || (previous != std::numeric_limits<std::size_t>::max() && s <= previous))
        throw Error(ErrorCode::contract, kModule, "row indices must be distinct, ascending and in range").at("cluster " + std::to_string(k));
      previous = s;
      ll.row(row) = chain.log_lik().row(static_cast<Eigen::Index>(s));
      if (params) params->values.row(row) = chain.params()->values.row(static_cast<Eigen::Index>(s));
      ++row;
    }
  }
  return ChainDraws("resampled", std::move(ll), std::move(params));
}

}  // namespace chainstack
