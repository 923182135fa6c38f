#include <doctest.h>

#include <cmath>

#include "chainstack/simplex_optimizer.hpp"
#include "fixtures.hpp"

using namespace chainstack;

namespace {

/// sum_k a_k log w_k, maximized at a / sum(a).
class LogLinear final : public ConcaveSimplexObjective {
 public:
  explicit LogLinear(Eigen::VectorXd a) : a_(std::move(a)) {}
  std::size_t dimension() const override { return static_cast<std::size_t>(a_.size()); }
  double value(const Eigen::VectorXd& w) const override { return a_.dot(w.array().log().matrix()); }
  void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* h) const override {
    g = a_.cwiseQuotient(w);
    if (h) *h = (-a_.cwiseQuotient(w.cwiseProduct(w))).asDiagonal();
  }

 private:
  Eigen::VectorXd a_;
};

/// -|w - c|^2, maximized at the Euclidean projection of c onto the simplex.
class Quadratic final : public ConcaveSimplexObjective {
 public:
  explicit Quadratic(Eigen::VectorXd c) : c_(std::move(c)) {}
  std::size_t dimension() const override { return static_cast<std::size_t>(c_.size()); }
  double value(const Eigen::VectorXd& w) const override { return -(w - c_).squaredNorm(); }
  void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* h) const override {
    g = -2.0 * (w - c_);
    if (h) *h = -2.0 * Eigen::MatrixXd::Identity(c_.size(), c_.size());
  }

 private:
  Eigen::VectorXd c_;
};

}  // namespace

TEST_CASE("interior optimum of a log-linear objective") {
  Eigen::VectorXd a(4);
  a << 1.0, 2.0, 3.0, 4.0;
  auto opt = maximize_on_simplex(LogLinear(a));
  CHECK(opt.converged);
  for (int k = 0; k < 4; ++k) CHECK(opt.w[k] == doctest::Approx(a[k] / 10.0).epsilon(1e-7));
  CHECK(opt.w.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("interior quadratic optimum") {
  Eigen::VectorXd c(3);
  c << 0.2, 0.5, 0.3;
  auto opt = maximize_on_simplex(Quadratic(c));
  CHECK(opt.converged);
  CHECK((opt.w - c).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("boundary quadratic optimum approaches the projection") {
  Eigen::VectorXd c(3);
  c << 0.9, 0.6, -0.5;  // projection onto the simplex is (0.65, 0.35, 0)
  auto opt = maximize_on_simplex(Quadratic(c), {1e-12, 100000, 100});
  CHECK(opt.converged);
  CHECK(opt.w[0] == doctest::Approx(0.65).epsilon(1e-4));
  CHECK(opt.w[1] == doctest::Approx(0.35).epsilon(1e-4));
  CHECK(opt.w[2] < 1e-4);
  CHECK((opt.w.array() > 0.0).all());
}

TEST_CASE("a custom start and a one-dimensional problem") {
  Eigen::VectorXd a(2);
  a << 3.0, 1.0;
  Eigen::VectorXd start(2);
  start << 0.01, 0.99;
  auto opt = maximize_on_simplex(LogLinear(a), {}, start);
  CHECK(opt.w[0] == doctest::Approx(0.75).epsilon(1e-7));
  Eigen::VectorXd one(1);
  one << 2.0;
  auto single = maximize_on_simplex(LogLinear(one));
  CHECK(single.w[0] == 1.0);
}

TEST_CASE("matches a grid search on random log-linear-plus-quadratic objectives") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    chainstack::CounterRng rng(seed);
    Eigen::VectorXd a(3), c(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = 0.1 + rng.uniform();
      c[k] = rng.normal();
    }
    struct Sum final : ConcaveSimplexObjective {
      LogLinear l;
      Quadratic q;
      Sum(Eigen::VectorXd a, Eigen::VectorXd c) : l(std::move(a)), q(std::move(c)) {}
      std::size_t dimension() const override { return 3; }
      double value(const Eigen::VectorXd& w) const override { return l.value(w) + q.value(w); }
      void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* h) const override {
        Eigen::VectorXd g2;
        Eigen::MatrixXd h2;
        l.derivatives(w, g, h);
        q.derivatives(w, g2, h ? &h2 : nullptr);
        g += g2;
        if (h) *h += h2;
      }
    } f(a, c);
    auto opt = maximize_on_simplex(f);
    REQUIRE(opt.converged);
    auto best = fixtures::refined_grid_argmax(3, 1000, [&](const std::vector<double>& w) {
      return f.value(Eigen::Map<const Eigen::VectorXd>(w.data(), 3));
    });
    for (int k = 0; k < 3; ++k) CHECK(std::abs(opt.w[k] - best[static_cast<std::size_t>(k)]) < 2e-3);
  }
}
