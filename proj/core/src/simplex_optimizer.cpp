#include "chainstack/simplex_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace chainstack {

namespace {

constexpr double kPinned = 1e-8;

void renormalize(Eigen::VectorXd& w) {
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = std::max(w[k], std::numeric_limits<double>::min());
  w /= w.sum();
}

/// One exponentiated-gradient step with backtracking. Returns false when no
/// step size improves the objective.
bool mirror_step(const ConcaveSimplexObjective& f, Eigen::VectorXd& w, double& value, double& eta) {
  Eigen::VectorXd g;
  f.derivatives(w, g, nullptr);
  const double top = g.maxCoeff();
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::VectorXd trial = (w.array() * ((g.array() - top) * eta).exp()).matrix();
    renormalize(trial);
    const double predicted = g.dot(trial - w);
    const double v = f.value(trial);
    if (std::isfinite(v) && v >= value + 1e-4 * predicted && v >= value) {
      const bool moved = v > value || (trial - w).lpNorm<Eigen::Infinity>() > 0.0;
      w = std::move(trial);
      value = v;
      eta *= 1.5;
      return moved;
    }
    eta *= 0.5;
  }
  return false;
}

}  // namespace

SimplexOptimum maximize_on_simplex(const ConcaveSimplexObjective& f, const SimplexOptions& options,
                                   const std::optional<Eigen::VectorXd>& start) {
  const auto k = static_cast<Eigen::Index>(f.dimension());
  SimplexOptimum out;
  out.w = start ? *start : Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  renormalize(out.w);
  out.value = f.value(out.w);
  if (k == 1) {
    out.converged = true;
    return out;
  }

  Eigen::VectorXd g;
  f.derivatives(out.w, g, nullptr);
  double eta = 1.0 / std::max(1e-12, (g.array() - g.dot(out.w)).abs().maxCoeff());
  std::size_t iter = 0;
  for (; iter < std::min(options.mirror_iters, options.max_iter); ++iter) {
    const double before = out.value;
    if (!mirror_step(f, out.w, out.value, eta)) break;
    if (out.value - before <= options.tol * 1e-3) break;
  }

  Eigen::MatrixXd h;
  for (; iter < options.max_iter; ++iter) {
    f.derivatives(out.w, g, &h);
    // For concave f, max_j g_j - g.w bounds the remaining gain.
    const double mean = g.dot(out.w);
    if (g.maxCoeff() - mean <= options.tol) {
      out.converged = true;
      ++iter;
      break;
    }

    // Coordinates at the boundary that the gradient pushes outward are held
    // fixed for the Newton step and squeezed afterwards.
    std::vector<Eigen::Index> free;
    std::vector<Eigen::Index> pinned;
    // First-order bound on what moving the pinned mass elsewhere could gain.
    double pinned_gain = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (out.w[j] < kPinned && g[j] < mean) {
        pinned.push_back(j);
        pinned_gain += out.w[j] * (g.maxCoeff() - g[j]);
      } else {
        free.push_back(j);
      }
    }

    bool accepted = false;
    double decrement = 0.0;
    bool newton_usable = free.size() < 2;
    if (free.size() >= 2) {
      // Null-space basis of sum(d) = 0 on the free coordinates: e_i - e_last.
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(k, m - 1);
      for (Eigen::Index i = 0; i + 1 < m; ++i) {
        basis(free[static_cast<std::size_t>(i)], i) = 1.0;
        basis(free.back(), i) = -1.0;
      }
      const Eigen::VectorXd reduced_grad = basis.transpose() * g;
      const Eigen::MatrixXd reduced_neg_hess = -(basis.transpose() * h * basis);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced_neg_hess);
      const bool usable = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                          (ldlt.vectorD().array() > 0.0).all();
      const Eigen::VectorXd d = usable ? Eigen::VectorXd(basis * ldlt.solve(reduced_grad)) : Eigen::VectorXd();
      decrement = usable ? g.dot(d) : -1.0;
      newton_usable = usable && std::isfinite(decrement) && decrement >= 0.0;
      if (newton_usable) {
        double t = 1.0;
        for (Eigen::Index j = 0; j < k; ++j)
          if (d[j] < 0.0) t = std::min(t, -0.99 * out.w[j] / d[j]);
        for (int attempt = 0; attempt < 80 && t > 0.0; ++attempt, t *= 0.5) {
          Eigen::VectorXd trial = out.w + t * d;
          if ((trial.array() <= 0.0).any()) continue;
          trial /= trial.sum();
          const double v = f.value(trial);
          if (std::isfinite(v) && v >= out.value + 0.25 * t * decrement) {
            out.w = std::move(trial);
            out.value = v;
            accepted = true;
            break;
          }
        }
      }
    }
    if (!pinned.empty()) {
      Eigen::VectorXd trial = out.w;
      for (auto j : pinned) trial[j] *= 1e-2;
      renormalize(trial);
      const double v = f.value(trial);
      if (std::isfinite(v) && v >= out.value) {
        out.w = std::move(trial);
        out.value = v;
        accepted = true;
      }
    }
    if (!newton_usable) {
      if (mirror_step(f, out.w, out.value, eta)) continue;
      if (!accepted) break;
      continue;
    }
    if (0.5 * decrement + pinned_gain <= options.tol) {
      out.converged = true;
      ++iter;
      break;
    }
    if (!accepted) {
      // No representable improvement: the iterate sits at the optimum up to
      // rounding in the objective.
      out.converged = 0.5 * decrement + pinned_gain <= 1e-8 * (1.0 + std::abs(out.value));
      ++iter;
      break;
    }
  }
  out.iterations = iter;
  return out;
}

}  // namespace chainstack
