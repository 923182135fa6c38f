#include "chainstack/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace chainstack {

namespace {

constexpr const char* kModule = "stacking";

void check_loo(const LooMatrix& loo) {
  if (loo.n_chains() == 0) throw Error(ErrorCode::contract, kModule, "LOO matrix has no columns");
  for (Eigen::Index k = 0; k < loo.log_loo.cols(); ++k)
    for (Eigen::Index i = 0; i < loo.log_loo.rows(); ++i)
      if (!std::isfinite(loo.log_loo(i, k)))
        throw Error(ErrorCode::numerical_failure, kModule, "LOO entry is not positive and finite")
            .at("(" + std::to_string(i) + ", " + std::to_string(k) + ")");
}

/// Stacking objective with rows rescaled by their maximum so that
/// exp(log_loo) never underflows; the scale returns as an additive constant.
class StackingObjective final : public ConcaveSimplexObjective {
 public:
  StackingObjective(const LooMatrix& loo, std::vector<double> alpha)
      : scaled_(loo.log_loo.rows(), loo.log_loo.cols()),
        row_offset_(loo.log_loo.rowwise().maxCoeff()),
        alpha_(std::move(alpha)) {
    for (Eigen::Index i = 0; i < scaled_.rows(); ++i)
      scaled_.row(i) = (loo.log_loo.row(i).array() - row_offset_[i]).exp();
    offset_ = row_offset_.sum();
  }

  std::size_t dimension() const override { return static_cast<std::size_t>(scaled_.cols()); }

  double value(const Eigen::VectorXd& w) const override {
    const Eigen::VectorXd mix = scaled_ * w;
    double v = offset_;
    for (Eigen::Index i = 0; i < mix.size(); ++i) v += std::log(mix[i]);
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double a = alpha_[static_cast<std::size_t>(k)] - 1.0;
      if (a != 0.0) v += a * std::log(w[k]);
    }
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  }

  void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* h) const override {
    const Eigen::VectorXd inv_mix = (scaled_ * w).cwiseInverse();
    const Matrix weighted = inv_mix.asDiagonal() * scaled_;
    g = weighted.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < w.size(); ++k) g[k] += (alpha_[static_cast<std::size_t>(k)] - 1.0) / w[k];
    if (h) {
      *h = -(weighted.transpose() * weighted);
      for (Eigen::Index k = 0; k < w.size(); ++k)
        (*h)(k, k) -= (alpha_[static_cast<std::size_t>(k)] - 1.0) / (w[k] * w[k]);
    }
  }

 private:
  Matrix scaled_;
  Eigen::VectorXd row_offset_;
  double offset_ = 0.0;
  std::vector<double> alpha_;
};

}  // namespace

ChainWeights::ChainWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw Error(ErrorCode::contract, kModule, "empty weight vector");
  double sum = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::contract, kModule, "weight outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::contract, kModule, "weights do not sum to 1");
}

ChainWeights ChainWeights::normalized(std::vector<double> w) {
  double sum = 0.0;
  for (double& v : w) {
    v = std::max(v, 0.0);
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw Error(ErrorCode::contract, kModule, "weights cannot be normalized");
  for (double& v : w) v /= sum;
  return ChainWeights(std::move(w));
}

std::vector<double> dirichlet_concentration(const StackingConfig& cfg, std::size_t k) {
  if (!(cfg.lambda > 1.0) || !std::isfinite(cfg.lambda))
    throw Error(ErrorCode::domain, kModule, "lambda must be finite and greater than 1");
  std::vector<double> ess = cfg.ess;
  if (ess.empty()) ess.assign(k, 1.0);
  if (ess.size() != k)
    throw Error(ErrorCode::dimension_mismatch, kModule,
                "ess has " + std::to_string(ess.size()) + " entries for " + std::to_string(k) + " columns");
  const double total = std::accumulate(ess.begin(), ess.end(), 0.0);
  for (double e : ess)
    if (!(e > 0.0) || !std::isfinite(e)) throw Error(ErrorCode::contract, kModule, "ess must be positive");
  std::vector<double> alpha(k);
  for (std::size_t j = 0; j < k; ++j)
    alpha[j] = 1.0 + (cfg.lambda - 1.0) * ess[j] / total;
  return alpha;
}

double stacked_lpd(const ChainWeights& w, const LooMatrix& loo) {
  if (w.size() != loo.n_chains())
    throw Error(ErrorCode::dimension_mismatch, kModule, "weight length does not match LOO columns");
  double total = 0.0;
  for (Eigen::Index i = 0; i < loo.log_loo.rows(); ++i) {
    const double top = loo.log_loo.row(i).maxCoeff();
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      acc += w[k] * std::exp(loo.log_loo(i, static_cast<Eigen::Index>(k)) - top);
    total += top + std::log(acc);
  }
  return total;
}

double objective(const ChainWeights& w, const LooMatrix& loo, const StackingConfig& cfg) {
  if (w.size() != loo.n_chains())
    throw Error(ErrorCode::dimension_mismatch, kModule, "weight length does not match LOO columns");
  const auto alpha = dirichlet_concentration(cfg, w.size());
  double v = stacked_lpd(w, loo);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double a = alpha[k] - 1.0;
    if (a == 0.0) continue;
    if (w[k] == 0.0) return a > 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    v += a * std::log(w[k]);
  }
  return v;
}

ConvergenceError::ConvergenceError(std::string message, StackingResult best)
    : Error(ErrorCode::convergence, kModule, std::move(message)), best_(std::move(best)) {}

StackingResult optimize_weights(const LooMatrix& loo, const StackingConfig& cfg) {
  check_loo(loo);
  const std::size_t k = loo.n_chains();
  auto alpha = dirichlet_concentration(cfg, k);
  if (k == 1) {
    ChainWeights one({1.0});
    return {one, objective(one, loo, cfg), 0};
  }
  StackingObjective f(loo, std::move(alpha));
  const auto opt = maximize_on_simplex(f, SimplexOptions{cfg.tol, cfg.max_iter, 100});
  std::vector<double> w(opt.w.data(), opt.w.data() + opt.w.size());
  StackingResult result{ChainWeights::normalized(std::move(w)), opt.value, opt.iterations};
  if (!opt.converged)
    throw ConvergenceError("stacking optimizer did not converge in " + std::to_string(cfg.max_iter) + " iterations",
                           result);
  return result;
}

ChainWeights uniform_weights(std::size_t k) {
  if (k == 0) throw Error(ErrorCode::contract, kModule, "need at least one component");
  return ChainWeights::normalized(std::vector<double>(k, 1.0));
}

ChainWeights pseudo_bma_weights(const LooMatrix& loo) {
  check_loo(loo);
  const Eigen::VectorXd elpd = loo.log_loo.colwise().sum().transpose();
  return mode_height_weights(std::span<const double>(elpd.data(), static_cast<std::size_t>(elpd.size())));
}

ChainWeights mode_height_weights(std::span<const double> log_heights) {
  if (log_heights.empty()) throw Error(ErrorCode::contract, kModule, "need at least one component");
  const double top = *std::max_element(log_heights.begin(), log_heights.end());
  if (!std::isfinite(top)) throw Error(ErrorCode::contract, kModule, "log heights must be finite");
  std::vector<double> w(log_heights.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!std::isfinite(log_heights[k])) throw Error(ErrorCode::contract, kModule, "log heights must be finite");
    w[k] = std::exp(log_heights[k] - top);
  }
  return ChainWeights::normalized(std::move(w));
}

MonitorCurve monitor_curve(const LooMatrix& loo, const StackingConfig& cfg, std::span<const std::size_t> order) {
  const std::size_t k = loo.n_chains();
  std::vector<bool> seen(k, false);
  if (order.size() != k) throw Error(ErrorCode::contract, kModule, "order is not a permutation of the chains");
  for (auto j : order) {
    if (j >= k || seen[j]) throw Error(ErrorCode::contract, kModule, "order is not a permutation of the chains");
    seen[j] = true;
  }
  MonitorCurve curve;
  curve.lpd_loo.reserve(k);
  for (std::size_t prefix = 1; prefix <= k; ++prefix) {
    const auto cols = order.first(prefix);
    const LooMatrix sub = loo.select(cols);
    StackingConfig sub_cfg = cfg;
    if (!cfg.ess.empty()) {
      sub_cfg.ess.clear();
      for (auto j : cols) sub_cfg.ess.push_back(cfg.ess.at(j));
    }
    const auto result = optimize_weights(sub, sub_cfg);
    curve.lpd_loo.push_back(stacked_lpd(result.weights, sub));
  }
  return curve;
}

double stacked_ess(const ChainWeights& w, std::span<const double> ess) {
  if (ess.size() != w.size()) throw Error(ErrorCode::dimension_mismatch, kModule, "ess length does not match weights");
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!(ess[k] > 0.0)) throw Error(ErrorCode::contract, kModule, "ess must be positive");
    acc += w[k] * w[k] / ess[k];
  }
  return 1.0 / acc;
}

}  // namespace chainstack
