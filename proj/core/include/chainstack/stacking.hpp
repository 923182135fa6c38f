#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "chainstack/error.hpp"
#include "chainstack/psis.hpp"
#include "chainstack/simplex_optimizer.hpp"

namespace chainstack {

/// A point on the probability simplex: nonnegative, summing to 1 within 1e-12.
class ChainWeights {
 public:
  /// Validates `w` as given.
  explicit ChainWeights(std::vector<double> w);

  /// Clamps negatives to zero and rescales to sum 1.
  static ChainWeights normalized(std::vector<double> w);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t k) const { return w_.at(k); }
  const std::vector<double>& values() const noexcept { return w_; }
  Eigen::VectorXd as_vector() const { return Eigen::Map<const Eigen::VectorXd>(w_.data(), static_cast<Eigen::Index>(w_.size())); }

 private:
  std::vector<double> w_;
};

struct StackingConfig {
  double lambda = 1.001;        // Dirichlet pooling scale, must exceed 1
  double tol = 1e-9;            // objective-gain stopping tolerance
  std::size_t max_iter = 100000;
  std::vector<double> ess;      // per-column effective sample sizes; empty means all equal
};

/// Dirichlet concentrations alpha_k = 1 + (lambda - 1) ess_k / sum(ess).
/// lambda -> 1 is the flat prior and lambda -> inf pins the weights to ess
/// proportions. Splitting one column's ess across duplicate copies of that
/// column leaves the optimal stacked density unchanged.
std::vector<double> dirichlet_concentration(const StackingConfig& cfg, std::size_t k);

/// sum_i log(sum_k w_k loo[i, k]) + sum_k (alpha_k - 1) log w_k. Boundary
/// points with alpha_k > 1 evaluate to -inf.
double objective(const ChainWeights& w, const LooMatrix& loo, const StackingConfig& cfg);

/// Log predictive density of the w-mixture: sum_i log(sum_k w_k loo[i, k]).
double stacked_lpd(const ChainWeights& w, const LooMatrix& loo);

struct StackingResult {
  ChainWeights weights;
  double objective = 0.0;
  std::size_t iterations = 0;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string message, StackingResult best);
  const StackingResult& best() const noexcept { return best_; }

 private:
  StackingResult best_;
};

/// Maximizer of `objective` on the simplex (unique for lambda > 1).
/// Throws Domain for lambda <= 1 and ConvergenceError after max_iter.
StackingResult optimize_weights(const LooMatrix& loo, const StackingConfig& cfg = {});

ChainWeights uniform_weights(std::size_t k);

/// w_k proportional to exp(sum_i log loo[i, k]).
ChainWeights pseudo_bma_weights(const LooMatrix& loo);

/// Softmax of user-supplied log posterior heights at each cluster's mode.
ChainWeights mode_height_weights(std::span<const double> log_heights);

/// Stacked LOO log predictive density after re-optimizing on each prefix
/// order[0..K'), K' = 1..K.
struct MonitorCurve {
  std::vector<double> lpd_loo;
};

MonitorCurve monitor_curve(const LooMatrix& loo, const StackingConfig& cfg, std::span<const std::size_t> order);

/// (sum_k w_k^2 / ess_k)^-1.
double stacked_ess(const ChainWeights& w, std::span<const double> ess);

}  // namespace chainstack
