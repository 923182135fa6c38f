#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "chainstack/psis.hpp"
#include "chainstack/rng.hpp"
#include "chainstack/stacking.hpp"

namespace fixtures {

/// LooMatrix from natural-scale densities.
inline chainstack::LooMatrix loo_from_density(const chainstack::Matrix& density) {
  return {density.array().log().matrix(), chainstack::Matrix::Zero(density.rows(), density.cols())};
}

/// Random [n x k] log-LOO matrix: a shared per-row level plus column offsets of
/// scale `spread`, so columns differ in a way the optimizer has to resolve.
inline chainstack::LooMatrix random_loo(std::size_t n, std::size_t k, std::uint64_t seed, double spread = 1.5) {
  chainstack::CounterRng rng(seed);
  chainstack::Matrix log_loo(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < log_loo.rows(); ++i) {
    const double level = -2.0 + rng.normal();
    for (Eigen::Index j = 0; j < log_loo.cols(); ++j) log_loo(i, j) = level + spread * rng.normal();
  }
  return {log_loo, chainstack::Matrix::Zero(log_loo.rows(), log_loo.cols())};
}

/// Visits every point of the simplex grid {w : w_j = m_j / steps, sum m_j = steps}.
inline void for_each_grid_point(std::size_t k, std::size_t steps, const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<std::size_t> m(k, 0);
  std::vector<double> w(k);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t j, std::size_t left) {
    if (j + 1 == k) {
      m[j] = left;
      for (std::size_t t = 0; t < k; ++t) w[t] = static_cast<double>(m[t]) / static_cast<double>(steps);
      fn(w);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      m[j] = c;
      rec(j + 1, left - c);
    }
  };
  rec(0, steps);
}

/// Brute-force maximizer of f over the simplex grid with spacing 1/steps.
inline std::vector<double> grid_argmax(std::size_t k, std::size_t steps, const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> best;
  double best_value = -std::numeric_limits<double>::infinity();
  for_each_grid_point(k, steps, [&](const std::vector<double>& w) {
    const double v = f(w);
    if (v > best_value) {
      best_value = v;
      best = w;
    }
  });
  return best;
}

/// Simplex grid search at spacing 1/fine: a full grid at spacing 1/50, then
/// exhaustive windows of +-10 fine steps per coordinate, recentred on the best
/// point until it lies strictly inside the window.
inline std::vector<double> refined_grid_argmax(std::size_t k, std::size_t fine,
                                               const std::function<double(const std::vector<double>&)>& f) {
  const auto start = grid_argmax(k, 50, f);
  const long radius = 10;
  const long top = static_cast<long>(fine);
  const double h = 1.0 / static_cast<double>(fine);
  std::vector<long> center(k);
  long assigned = 0;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    center[j] = std::lround(start[j] * static_cast<double>(fine));
    assigned += center[j];
  }
  center[k - 1] = top - assigned;
  auto to_weights = [&](const std::vector<long>& m) {
    std::vector<double> w(k);
    for (std::size_t t = 0; t < k; ++t) w[t] = static_cast<double>(m[t]) * h;
    return w;
  };
  double best_value = f(to_weights(center));
  for (int round = 0; round < 1000; ++round) {
    std::vector<long> best = center;
    bool on_edge = false;
    std::vector<long> m(k);
    std::function<void(std::size_t, long)> rec = [&](std::size_t j, long used) {
      if (j + 1 == k) {
        const long d = -used;
        if (d < -radius || d > radius) return;
        m[j] = center[j] + d;
        for (std::size_t t = 0; t < k; ++t)
          if (m[t] < 0 || m[t] > top) return;
        const double v = f(to_weights(m));
        if (v > best_value) {
          best_value = v;
          best = m;
          on_edge = false;
          for (std::size_t t = 0; t < k; ++t) {
            const long off = m[t] - center[t];
            if ((off == radius || off == -radius) && m[t] > 0 && m[t] < top) on_edge = true;
          }
        }
        return;
      }
      for (long d = -radius; d <= radius; ++d) {
        m[j] = center[j] + d;
        rec(j + 1, used + d);
      }
    };
    rec(0, 0);
    const bool moved = best != center;
    center = best;
    if (!moved || !on_edge) break;
  }
  return to_weights(center);
}

}  // namespace fixtures
