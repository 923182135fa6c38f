#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

namespace chainstack {

/// A smooth concave function on the interior of the probability simplex.
class ConcaveSimplexObjective {
 public:
  virtual ~ConcaveSimplexObjective() = default;

  virtual std::size_t dimension() const = 0;

  /// Function value; -inf is allowed on the boundary.
  virtual double value(const Eigen::VectorXd& w) const = 0;

  /// Gradient and, when `hessian` is non-null, the Hessian at an interior point.
  virtual void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& gradient, Eigen::MatrixXd* hessian) const = 0;
};

struct SimplexOptions {
  double tol = 1e-9;               // stop once the Newton decrement predicts a gain below tol
  std::size_t max_iter = 100000;   // mirror-ascent plus Newton iterations
  std::size_t mirror_iters = 100;  // exponentiated-gradient warm start before Newton
};

struct SimplexOptimum {
  Eigen::VectorXd w;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Maximizes a concave objective over the simplex. Iterates stay strictly
/// interior: an exponentiated-gradient (mirror ascent) phase with backtracking
/// from `start` (default uniform), then damped Newton steps restricted to
/// sum(w) = 1 with a fraction-to-boundary rule. Deterministic.
SimplexOptimum maximize_on_simplex(const ConcaveSimplexObjective& objective, const SimplexOptions& options = {},
                                   const std::optional<Eigen::VectorXd>& start = std::nullopt);

}  // namespace chainstack
