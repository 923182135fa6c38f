#include "chainstack/psis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "chainstack/error.hpp"
#include "chainstack/parallel.hpp"

namespace chainstack {

namespace {

constexpr const char* kModule = "psis";
constexpr std::size_t kMinTail = 5;

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace

std::size_t psis_tail_length(std::size_t draws) {
  const double s = static_cast<double>(draws);
  return static_cast<std::size_t>(std::min(std::ceil(0.2 * s), std::ceil(3.0 * std::sqrt(s))));
}

std::optional<GpdFit> fit_gpd_excesses(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < kMinTail) return std::nullopt;
  constexpr double prior = 3.0;
  const std::size_t grid = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const double xstar = x[static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5)) - 1];
  const double xmax = x[n - 1];
  if (!(xstar > 0.0) || !(xmax > 0.0)) return std::nullopt;

  std::vector<double> theta(grid);
  std::vector<double> log_lik(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    theta[j] = 1.0 / xmax + (1.0 - std::sqrt(static_cast<double>(grid) / (static_cast<double>(j) + 0.5))) / prior / xstar;
    // Profile log-likelihood of theta with k(theta) = mean log1p(-theta x).
    double k = 0.0;
    for (double v : x) k += std::log1p(-theta[j] * v);
    k /= static_cast<double>(n);
    log_lik[j] = static_cast<double>(n) * (std::log(-theta[j] / k) - k - 1.0);
  }
  const double norm = log_sum_exp(log_lik);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < grid; ++j) {
    const double w = std::exp(log_lik[j] - norm);
    if (std::isfinite(w)) theta_hat += theta[j] * w;
  }
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= static_cast<double>(n);
  const double sigma = -k / theta_hat;
  // Shrink toward 0.5 as if 10 prior observations had k = 0.5.
  k = (k * static_cast<double>(n) + 10.0 * 0.5) / (static_cast<double>(n) + 10.0);
  if (!std::isfinite(k) || !std::isfinite(sigma) || !(sigma > 0.0)) return std::nullopt;
  return GpdFit{k, sigma, 0.0};
}

std::optional<GpdFit> fit_gpd_tail(std::span<const double> x, std::size_t tail_count) {
  if (tail_count < kMinTail || x.size() < tail_count) return std::nullopt;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t first_tail = sorted.size() - tail_count;
  const double threshold = first_tail > 0 ? sorted[first_tail - 1] : 0.0;
  const double lo = sorted[first_tail];
  const double hi = sorted.back();
  if (!(hi - lo > std::numeric_limits<double>::epsilon() * std::max(std::abs(hi), 1e-300))) return std::nullopt;
  std::vector<double> excess(tail_count);
  for (std::size_t j = 0; j < tail_count; ++j) excess[j] = sorted[first_tail + j] - threshold;
  auto fit = fit_gpd_excesses(excess);
  if (fit) fit->mu = threshold;
  return fit;
}

double gpd_quantile(double p, const GpdFit& fit) {
  if (std::abs(fit.k) < 1e-12) return fit.mu - fit.sigma * std::log1p(-p);
  return fit.mu + fit.sigma * std::expm1(-fit.k * std::log1p(-p)) / fit.k;
}

SmoothedColumn smooth_column(std::span<const double> raw) {
  SmoothedColumn out;
  out.values.assign(raw.begin(), raw.end());
  const std::size_t s = raw.size();
  if (s == 0) return out;
  const double raw_max = *std::max_element(raw.begin(), raw.end());
  if (!(raw_max > 0.0)) throw Error(ErrorCode::contract, kModule, "importance ratios are all zero");

  const std::size_t tail = psis_tail_length(s);
  if (tail < kMinTail || tail >= s) return out;

  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(s - tail - 1);
  std::nth_element(order.begin(), cut, order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  std::sort(cut + 1, order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  const double threshold = raw[*cut];

  std::vector<double> tail_values(tail);
  for (std::size_t j = 0; j < tail; ++j) tail_values[j] = raw[order[s - tail + j]];
  const double lo = tail_values.front();
  const double hi = tail_values.back();
  if (!(hi - lo > std::numeric_limits<double>::epsilon() * hi)) return out;

  std::vector<double> excess(tail);
  for (std::size_t j = 0; j < tail; ++j) excess[j] = tail_values[j] - threshold;
  auto fit = fit_gpd_excesses(excess);
  if (!fit) return out;
  fit->mu = threshold;

  for (std::size_t z = 0; z < tail; ++z) {
    const double p = (static_cast<double>(z) + 0.5) / static_cast<double>(tail);
    out.values[order[s - tail + z]] = gpd_quantile(p, *fit);
  }
  for (double& v : out.values) v = std::min(v, raw_max);
  out.khat = fit->k;
  return out;
}

RawRatios raw_ratios(const ChainDraws& chain) {
  const auto& ll = chain.log_lik();
  RawRatios out{Matrix(ll.rows(), ll.cols()), Eigen::VectorXd(ll.cols())};
  for (Eigen::Index i = 0; i < ll.cols(); ++i) {
    const double shift = -ll.col(i).minCoeff();
    out.log_shift[i] = shift;
    out.ratios.col(i) = (-ll.col(i).array() - shift).exp().matrix();
  }
  return out;
}

SmoothedRatios smooth_ratios(const ChainDraws& chain, std::size_t threads) {
  auto raw = raw_ratios(chain);
  SmoothedRatios out{std::move(raw.ratios), Eigen::VectorXd(static_cast<Eigen::Index>(chain.n_obs()))};
  parallel_for(chain.n_obs(), threads, [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    auto smoothed = smooth_column(std::span<const double>(out.r.col(col).data(), static_cast<std::size_t>(out.r.rows())));
    out.r.col(col) = Eigen::Map<const Eigen::VectorXd>(smoothed.values.data(), out.r.rows());
    out.khat[col] = smoothed.khat;
  });
  return out;
}

LooPoint loo_point(std::span<const double> ll) {
  const std::size_t s = ll.size();
  double shift = -std::numeric_limits<double>::infinity();
  for (double v : ll) shift = std::max(shift, -v);
  std::vector<double> raw(s);
  for (std::size_t t = 0; t < s; ++t) raw[t] = std::exp(-ll[t] - shift);
  const auto smoothed = smooth_column(raw);

  std::vector<double> log_r(s);
  std::vector<double> log_num(s);
  for (std::size_t t = 0; t < s; ++t) {
    log_r[t] = std::log(smoothed.values[t]);
    log_num[t] = ll[t] + log_r[t];
  }
  return {log_sum_exp(log_num) - log_sum_exp(log_r), smoothed.khat};
}

LooMatrix LooMatrix::select(std::span<const std::size_t> columns) const {
  LooMatrix out{Matrix(log_loo.rows(), static_cast<Eigen::Index>(columns.size())),
                Matrix(khat.rows(), static_cast<Eigen::Index>(columns.size()))};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= n_chains()) throw Error(ErrorCode::contract, kModule, "column index out of range");
    out.log_loo.col(static_cast<Eigen::Index>(c)) = log_loo.col(static_cast<Eigen::Index>(columns[c]));
    out.khat.col(static_cast<Eigen::Index>(c)) = khat.col(static_cast<Eigen::Index>(columns[c]));
  }
  return out;
}

LooMatrix loo_matrix(const DrawSet& ds, std::size_t threads) {
  const std::size_t n = ds.n_obs();
  const std::size_t k_count = ds.size();
  LooMatrix out{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_count)),
                Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_count))};
  parallel_for(n * k_count, threads, [&](std::size_t job) {
    const std::size_t k = job / n;
    const auto i = static_cast<Eigen::Index>(job % n);
    const auto& ll = ds.chain(k).log_lik();
    const auto point = loo_point(std::span<const double>(ll.col(i).data(), static_cast<std::size_t>(ll.rows())));
    if (!std::isfinite(point.log_loo))
      throw Error(ErrorCode::numerical_failure, kModule, "LOO density is not a positive finite number")
          .at("(" + std::to_string(i) + ", " + std::to_string(k) + ")");
    out.log_loo(i, static_cast<Eigen::Index>(k)) = point.log_loo;
    out.khat(i, static_cast<Eigen::Index>(k)) = point.khat;
  });
  return out;
}

KhatSummary summarize_khat(const Matrix& khat) {
  KhatSummary summary;
  for (Eigen::Index j = 0; j < khat.size(); ++j) {
    const double k = khat.data()[j];
    const std::size_t bin = k <= 0.5 ? 0 : k <= 0.7 ? 1 : k <= 1.0 ? 2 : 3;
    ++summary.counts[bin];
    ++summary.total;
  }
  return summary;
}

}  // namespace chainstack
