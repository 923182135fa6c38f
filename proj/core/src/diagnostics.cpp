#include "chainstack/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "chainstack/error.hpp"
#include "chainstack/parallel.hpp"

namespace chainstack {

namespace {

constexpr const char* kModule = "diagnostics";

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double max_abs(std::span<const std::span<const double>> sequences) {
  double m = 0.0;
  for (auto seq : sequences)
    for (double v : seq) m = std::max(m, std::abs(v));
  return m;
}

std::array<std::span<const double>, 2> halves(std::span<const double> x) {
  const std::size_t first = x.size() / 2;
  return {x.first(first), x.subspan(first)};
}

/// sqrt(base + b / (n w)), with the constant-halves conventions when w vanishes.
/// Rounding in the means leaves ~ulp residue for exactly constant halves.
double rhat_from_variances(double base, double b, double n, double w, double scale) {
  const double noise = 1e-14 * scale * 1e-14 * scale;
  const bool w_zero = w <= noise;
  const bool b_zero = b <= noise * n;
  if (w_zero) return b_zero ? std::sqrt(base) : std::numeric_limits<double>::infinity();
  return std::sqrt(base + b / (n * w));
}

}  // namespace

double pooled_split_rhat(std::span<const std::span<const double>> sequences) {
  const std::size_t j_count = sequences.size();
  std::size_t total = 0;
  for (auto seq : sequences) {
    if (seq.empty()) throw Error(ErrorCode::contract, kModule, "empty sequence in split-R-hat");
    total += seq.size();
  }
  if (j_count < 2 || total < j_count + 2)
    throw Error(ErrorCode::too_few_draws, kModule, "split-R-hat needs at least 4 draws");

  double grand = 0.0;
  for (auto seq : sequences) grand += std::accumulate(seq.begin(), seq.end(), 0.0);
  grand /= static_cast<double>(total);

  double between = 0.0;
  double within = 0.0;
  for (auto seq : sequences) {
    const double m = mean_of(seq);
    between += (m - grand) * (m - grand);
    for (double v : seq) within += (v - m) * (v - m);
  }
  const double n = static_cast<double>(total) / static_cast<double>(j_count);
  const double b = 4.0 * n / static_cast<double>(j_count) * between;
  const double w = within / static_cast<double>(total - j_count);
  return rhat_from_variances((n - 1.0) / n, b, n, w, max_abs(sequences));
}

double split_rhat(std::span<const double> series) {
  if (series.size() < 4) throw Error(ErrorCode::too_few_draws, kModule, "split-R-hat needs S >= 4");
  const auto h = halves(series);
  const double s = static_cast<double>(series.size());
  const double grand = mean_of(series);
  double between = 0.0;
  double within = 0.0;
  for (auto half : h) {
    const double m = mean_of(half);
    between += (m - grand) * (m - grand);
    for (double v : half) within += (v - m) * (v - m);
  }
  const double w = within / (s - 2.0);
  return rhat_from_variances((s - 2.0) / s, s * between, s / 2.0, w, max_abs(std::span(h)));
}

double chain_ess(std::span<const double> series) {
  const std::size_t s = series.size();
  if (s < 8) throw Error(ErrorCode::too_few_draws, kModule, "ESS needs S >= 8");
  const double mean = mean_of(series);
  std::vector<double> centered(s);
  for (std::size_t t = 0; t < s; ++t) centered[t] = series[t] - mean;

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < s; ++t) acc += centered[t] * centered[t + lag];
    return acc / static_cast<double>(s);
  };
  const double c0 = autocov(0);
  const double scale = std::abs(mean) + 1.0;
  if (!(c0 > 1e-28 * scale * scale)) return static_cast<double>(s);

  // Geyer: pair sums Gamma_m = rho_{2m} + rho_{2m+1}, truncated at the first
  // non-positive pair and forced monotone non-increasing.
  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < s; ++m) {
    double gamma = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, previous);
    previous = gamma;
    tau += 2.0 * gamma;
  }
  if (tau <= 0.0) return static_cast<double>(s);
  return std::min(static_cast<double>(s) / tau, static_cast<double>(s));
}

std::vector<double> mean_log_lik_series(const ChainDraws& chain) {
  const auto& ll = chain.log_lik();
  std::vector<double> out(chain.draws(), 0.0);
  if (ll.cols() == 0) return out;
  const Eigen::VectorXd means = ll.rowwise().mean();
  std::copy(means.data(), means.data() + means.size(), out.begin());
  return out;
}

SeriesChooser parameter_series(std::string name) {
  return [name = std::move(name)](const ChainDraws& chain) {
    const auto& p = chain.params();
    std::optional<std::size_t> col;
    if (p) col = p->column(name);
    if (!col)
      throw Error(ErrorCode::contract, kModule, "chain has no parameter column '" + name + "'").at(chain.chain_id());
    const auto& v = p->values;
    std::vector<double> out(chain.draws());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = v(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(*col));
    return out;
  };
}

Eigen::MatrixXd pairwise_mixing(const DrawSet& ds, const SeriesChooser& summary, std::size_t threads) {
  const std::size_t m = ds.size();
  std::vector<std::vector<double>> series(m);
  parallel_for(m, threads, [&](std::size_t k) { series[k] = summary(ds.chain(k)); });

  Eigen::MatrixXd mix(m, m);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j; k < m; ++k) pairs.emplace_back(j, k);
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [j, k] = pairs[p];
    double value = 0.0;
    if (j == k) {
      value = split_rhat(series[j]);
    } else {
      const auto hj = halves(series[j]);
      const auto hk = halves(series[k]);
      const std::array<std::span<const double>, 4> seqs{hj[0], hj[1], hk[0], hk[1]};
      value = pooled_split_rhat(seqs);
    }
    mix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = value;
    mix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = value;
  });
  return mix;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(n_clusters);
  for (std::size_t k = 0; k < labels.size(); ++k) out.at(labels[k]).push_back(k);
  return out;
}

ClusterAssignment cluster_chains(const Eigen::MatrixXd& mix, double threshold) {
  if (mix.rows() != mix.cols()) throw Error(ErrorCode::dimension_mismatch, kModule, "mixing matrix is not square");
  const auto m = static_cast<std::size_t>(mix.rows());

  // Union-find over the threshold graph gives the single-linkage partition.
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k)
      if (mix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) < threshold) {
        const auto a = find(j);
        const auto b = find(k);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  ClusterAssignment ca;
  ca.labels.resize(m);
  std::vector<std::size_t> label_of_root(m, m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto r = find(k);
    if (label_of_root[r] == m) label_of_root[r] = ca.n_clusters++;
    ca.labels[k] = label_of_root[r];
  }
  return ca;
}

ClusterAssignment singleton_clusters(std::size_t m) {
  ClusterAssignment ca;
  ca.labels.resize(m);
  std::iota(ca.labels.begin(), ca.labels.end(), std::size_t{0});
  ca.n_clusters = m;
  return ca;
}

DrawSet merge_clusters(const DrawSet& ds, const ClusterAssignment& ca) {
  if (ca.labels.size() != ds.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "cluster labels do not match chain count");
  for (auto l : ca.labels)
    if (l >= ca.n_clusters) throw Error(ErrorCode::contract, kModule, "cluster label out of range");
  std::vector<ChainDraws> merged;
  merged.reserve(ca.n_clusters);
  for (const auto& members : ca.members()) {
    if (members.empty()) throw Error(ErrorCode::contract, kModule, "cluster labels are not a surjection");
    if (members.size() == 1) {
      merged.push_back(ds.chain(members.front()));
      continue;
    }
    std::vector<ChainDraws> parts;
    std::string id;
    for (auto k : members) {
      parts.push_back(ds.chain(k));
      id += (id.empty() ? "" : "+") + ds.chain(k).chain_id();
    }
    merged.push_back(concat_rows(parts, id));
  }
  return assemble(std::move(merged));
}

std::vector<ChainDiagnostics> diagnose_chains(const DrawSet& ds, const SeriesChooser& summary, std::size_t threads) {
  std::vector<ChainDiagnostics> out(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t k) {
    const auto series = summary(ds.chain(k));
    out[k].chain_id = ds.chain(k).chain_id();
    out[k].split_rhat = split_rhat(series);
    out[k].ess = series.size() >= 8 ? chain_ess(series) : static_cast<double>(series.size());
    out[k].cluster = k;
  });
  return out;
}

std::vector<double> cluster_ess(std::span<const ChainDiagnostics> per_chain, const ClusterAssignment& ca) {
  if (per_chain.size() != ca.labels.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "diagnostics do not match cluster labels");
  std::vector<double> ess(ca.n_clusters, 0.0);
  for (std::size_t k = 0; k < per_chain.size(); ++k) ess[ca.labels[k]] += per_chain[k].ess;
  return ess;
}

}  // namespace chainstack
