#include "chainstack/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "chainstack/error.hpp"
#include "chainstack/parallel.hpp"
#include "chainstack/simplex_optimizer.hpp"

namespace chainstack::cauchy {

namespace {

constexpr const char* kModule = "cauchy-theory";
constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kQuadratureTolerance = 1e-6;
constexpr double kRealTolerance = 1e-9;

double cauchy_density(double y, double loc) { return 1.0 / (kPi * (1.0 + (y - loc) * (y - loc))); }

double process_density(double y, double a, double p0) {
  return p0 * cauchy_density(y, a) + (1.0 - p0) * cauchy_density(y, -a);
}

void check_parameters(double a, double p0) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::domain, kModule, "a must be positive and finite");
  if (!(p0 >= 0.5 && p0 <= 1.0)) throw Error(ErrorCode::domain, kModule, "p0 must lie in [0.5, 1]");
}

/// Breakpoints in theta = atan(y) for the given locations, plus the endpoints.
std::vector<double> theta_breaks(std::vector<double> locations) {
  std::vector<double> breaks{-kHalfPi, kHalfPi};
  for (double c : locations) breaks.push_back(std::atan(c));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-12; }),
               breaks.end());
  return breaks;
}

/// int p_true(y) f(y) dy by adaptive Gauss-Kronrod on y = tan(theta), split at
/// the atan of every location where the integrand peaks.
template <class F>
double expect_under_process(double a, double p0, std::vector<double> locations, F&& f) {
  locations.push_back(a);
  locations.push_back(-a);
  const auto breaks = theta_breaks(std::move(locations));
  auto integrand = [&](double theta) {
    const double t = std::tan(theta);
    const double jacobian = 1.0 + t * t;
    return process_density(t, a, p0) * jacobian * f(t);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  double error_total = 0.0;
  const std::size_t last = breaks.size() - 2;
  for (std::size_t j = 0; j <= last; ++j) {
    double error = 0.0;
    if (j == 0 || j == last) {
      // The integrand has a log singularity at +-pi/2; theta = end -+ L v^4
      // flattens it to v^3 log v.
      const double end = j == 0 ? breaks.front() : breaks.back();
      const double length = breaks[j + 1] - breaks[j];
      const double dir = j == 0 ? 1.0 : -1.0;
      auto mapped = [&](double v) {
        const double v3 = v * v * v;
        return integrand(end + dir * length * v3 * v) * 4.0 * length * v3;
      };
      total += GK::integrate(mapped, 0.0, 1.0, 15, 1e-10, &error);
    } else {
      total += GK::integrate(integrand, breaks[j], breaks[j + 1], 15, 1e-10, &error);
    }
    error_total += error;
  }
  if (!std::isfinite(total) || error_total > kQuadratureTolerance)
    throw Error(ErrorCode::numerical_failure, kModule,
                "quadrature did not reach tolerance (error estimate " + std::to_string(error_total) + ")");
  return total;
}

double mixture_log_density(double y, const ChainWeights& w, std::span<const double> locs) {
  // Shared 1/pi factored out so far tails do not underflow.
  double acc = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < locs.size(); ++k)
    if (w[k] > 0.0) best = std::min(best, (y - locs[k]) * (y - locs[k]));
  for (std::size_t k = 0; k < locs.size(); ++k)
    if (w[k] > 0.0) acc += w[k] * (1.0 + best) / (1.0 + (y - locs[k]) * (y - locs[k]));
  return -std::log(kPi) - std::log1p(best) + std::log(acc);
}

/// Real roots of a monic polynomial given by its non-leading coefficients
/// (highest power first), from companion-matrix eigenvalues.
std::vector<std::complex<double>> companion_roots(const std::vector<double>& monic_tail) {
  const auto d = static_cast<Eigen::Index>(monic_tail.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) companion(0, j) = -monic_tail[static_cast<std::size_t>(j)];
  for (Eigen::Index j = 1; j < d; ++j) companion(j, j - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> roots;
  for (Eigen::Index j = 0; j < d; ++j) roots.push_back(solver.eigenvalues()[j]);
  return roots;
}

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
  double v = 0.0;
  for (double coef : c) v = v * x + coef;
  return v;
}

template <std::size_t N>
double horner_derivative(const std::array<double, N>& c, double x) {
  double v = 0.0;
  for (std::size_t j = 0; j + 1 < N; ++j) v = v * x + c[j] * static_cast<double>(N - 1 - j);
  return v;
}

template <std::size_t N>
double newton_polish(const std::array<double, N>& c, double x) {
  for (int it = 0; it < 8; ++it) {
    const double d = horner_derivative(c, x);
    if (d == 0.0) break;
    const double step = horner(c, x) / d;
    const double next = x - step;
    if (!std::isfinite(next)) break;
    if (std::abs(horner(c, next)) > std::abs(horner(c, x))) break;
    x = next;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

/// Fixed composite Gauss-Legendre rule on theta in (-pi/2, pi/2): uniform
/// panels between breakpoints, dyadically refined toward both endpoints.
/// Used where value, gradient and Hessian must come from one discrete sum.
struct FixedRule {
  std::vector<double> y;
  std::vector<double> weight;  // includes p_true(y) and the tan Jacobian
};

FixedRule process_rule(double a, double p0, std::vector<double> locations) {
  locations.push_back(a);
  locations.push_back(-a);
  const auto breaks = theta_breaks(std::move(locations));
  using rule = boost::math::quadrature::gauss<double, 20>;
  const auto& x = rule::abscissa();
  const auto& wt = rule::weights();
  std::vector<std::pair<double, double>> panels;
  constexpr int kPanels = 400;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    const double width = (breaks[j + 1] - breaks[j]) / kPanels;
    for (int p = 0; p < kPanels; ++p) {
      double lo = breaks[j] + width * p;
      double hi = p + 1 == kPanels ? breaks[j + 1] : lo + width;
      const bool left_end = j == 0 && p == 0;
      const bool right_end = j + 2 == breaks.size() && p + 1 == kPanels;
      if (!left_end && !right_end) {
        panels.emplace_back(lo, hi);
        continue;
      }
      for (int level = 0; level < 40; ++level) {
        const double mid = 0.5 * (lo + hi);
        if (left_end) {
          panels.emplace_back(mid, hi);
          hi = mid;
        } else {
          panels.emplace_back(lo, mid);
          lo = mid;
        }
      }
      panels.emplace_back(lo, hi);
    }
  }
  FixedRule out;
  for (const auto& [lo, hi] : panels) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    for (std::size_t j = 0; j < x.size(); ++j)
      for (double sign : {-1.0, 1.0}) {
        const double theta = mid + sign * half * x[j];
        const double t = std::tan(theta);
        out.y.push_back(t);
        out.weight.push_back(half * wt[j] * process_density(t, a, p0) * (1.0 + t * t));
      }
  }
  return out;
}

/// Expected log density of a Cauchy mixture with fixed locations, as a
/// concave function of the mixture weights.
class MixtureElpd final : public ConcaveSimplexObjective {
 public:
  MixtureElpd(const FixedRule& rule, std::span<const double> locs)
      : weight_(Eigen::Map<const Eigen::VectorXd>(rule.weight.data(), static_cast<Eigen::Index>(rule.weight.size()))),
        scaled_(static_cast<Eigen::Index>(rule.y.size()), static_cast<Eigen::Index>(locs.size())),
        offset_(static_cast<Eigen::Index>(rule.y.size())) {
    for (Eigen::Index j = 0; j < scaled_.rows(); ++j) {
      const double y = rule.y[static_cast<std::size_t>(j)];
      double best = std::numeric_limits<double>::infinity();
      for (double c : locs) best = std::min(best, (y - c) * (y - c));
      offset_[j] = -std::log(kPi) - std::log1p(best);
      for (std::size_t k = 0; k < locs.size(); ++k)
        scaled_(j, static_cast<Eigen::Index>(k)) = (1.0 + best) / (1.0 + (y - locs[k]) * (y - locs[k]));
    }
    constant_ = weight_.dot(offset_);
  }

  std::size_t dimension() const override { return static_cast<std::size_t>(scaled_.cols()); }

  double value(const Eigen::VectorXd& w) const override {
    const Eigen::VectorXd mix = scaled_ * w;
    return constant_ + weight_.dot(mix.array().log().matrix());
  }

  void derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* h) const override {
    const Eigen::VectorXd inv = (scaled_ * w).cwiseInverse();
    const Eigen::MatrixXd ratio = inv.asDiagonal() * scaled_;
    g = ratio.transpose() * weight_;
    if (h) *h = -(ratio.transpose() * weight_.asDiagonal() * ratio);
  }

 private:
  Eigen::VectorXd weight_;
  Eigen::MatrixXd scaled_;
  Eigen::VectorXd offset_;
  double constant_ = 0.0;
};

}  // namespace

void Scenario::validate() const { check_parameters(a, p0); }

std::vector<double> generate_data(const Scenario& sc) {
  sc.validate();
  CounterRng rng(derive_seed(sc.seed, 0));
  std::vector<double> y(sc.n);
  for (auto& v : y) {
    const bool right = rng.uniform() < sc.p0;
    v = rng.cauchy(right ? sc.a : -sc.a, 1.0);
  }
  return y;
}

double h_value(double mu, double a, double p0) {
  return -kPi * (p0 * std::log(4.0 + (mu - a) * (mu - a)) + (1.0 - p0) * std::log(4.0 + (mu + a) * (mu + a)));
}

double h_prime(double mu, double a, double p0) {
  const double r = mu - a;
  const double l = mu + a;
  return -2.0 * kPi * (p0 * r / (r * r + 4.0) + (1.0 - p0) * l / (l * l + 4.0));
}

double h_second(double mu, double a, double p0) {
  const double r = mu - a;
  const double l = mu + a;
  const double dr = (4.0 - r * r) / ((r * r + 4.0) * (r * r + 4.0));
  const double dl = (4.0 - l * l) / ((l * l + 4.0) * (l * l + 4.0));
  return -2.0 * kPi * (p0 * dr + (1.0 - p0) * dl);
}

std::array<double, 4> mode_cubic(double a, double p0) {
  const double a3 = a * a * a;
  return {-1.0, a - 2.0 * a * p0, a * a - 4.0, -4.0 * a - a3 + 8.0 * a * p0 + 2.0 * a3 * p0};
}

std::array<double, 5> boundary_quartic(double a) {
  const double a2 = a * a;
  const double a4 = a2 * a2;
  const double a6 = a4 * a2;
  return {a6 + 4.0 * a4, -2.0 * a6 - 8.0 * a4, a6 - 8.0 * a4 - 44.0 * a2, 12.0 * a4 + 44.0 * a2,
          -4.0 * a4 - 8.0 * a2 - 4.0};
}

double xi(double a) {
  if (!(a > 2.0) || !std::isfinite(a)) throw Error(ErrorCode::domain, kModule, "xi(a) is defined for a > 2");
  auto c = boundary_quartic(a);
  const double lead = c[0];
  for (double& v : c) v /= lead;
  auto roots = companion_roots({c[1], c[2], c[3], c[4]});
  std::sort(roots.begin(), roots.end(), [](auto x, auto y) { return x.real() < y.real(); });
  const auto root = roots[2];
  // Near a = 2 the middle pair coalesces at 0.5 and may come back as a
  // complex pair; its real part is the continuous limit.
  if (std::abs(root.imag()) > kRealTolerance * std::max(1.0, std::abs(root))) return root.real();
  return newton_polish(c, root.real());
}

ModeReport limiting_modes(double a, double p0) {
  check_parameters(a, p0);
  const auto g = mode_cubic(a, p0);
  // Monic form of g / (-1).
  const auto roots = companion_roots({-g[1], -g[2], -g[3]});
  std::vector<double> real_roots;
  for (const auto& r : roots)
    if (std::abs(r.imag()) <= kRealTolerance * std::max(1.0, std::abs(r))) real_roots.push_back(newton_polish(g, r.real()));
  std::sort(real_roots.begin(), real_roots.end());
  ModeReport report;
  for (double r : real_roots)
    if (h_second(r, a, p0) < 0.0) report.modes.push_back(r);
  report.modes.erase(std::unique(report.modes.begin(), report.modes.end(),
                                 [](double x, double y) { return std::abs(x - y) < 1e-9 * std::max(1.0, std::abs(x)); }),
                     report.modes.end());
  if (report.modes.empty()) {
    // Only possible on a tangency; fall back to the largest real root.
    report.modes.push_back(real_roots.empty() ? a : real_roots.back());
  }
  report.bimodal = report.modes.size() == 2;
  return report;
}

double concentration_point(double a, double p0) {
  const auto report = limiting_modes(a, p0);
  if (!report.bimodal) return report.modes.front();
  const double left = report.modes.front();
  const double right = report.modes.back();
  const double hl = h_value(left, a, p0);
  const double hr = h_value(right, a, p0);
  return hl > hr + 1e-12 * std::abs(hr) ? left : right;
}

double kl_cauchy(double mu1, double mu2, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::domain, kModule, "sigma must be positive");
  const double d = mu1 - mu2;
  return std::log1p(d * d / (4.0 * sigma * sigma));
}

double elpd_bayes_limit(double a, double p0) {
  const double g = concentration_point(a, p0);
  return -(p0 * std::log(kPi * (4.0 + (g - a) * (g - a))) + (1.0 - p0) * std::log(kPi * (4.0 + (g + a) * (g + a))));
}

double elpd_mixture(double a, double p0, const ChainWeights& w, std::span<const double> locs) {
  check_parameters(a, p0);
  if (w.size() != locs.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "one weight per location is required");
  for (double c : locs)
    if (!std::isfinite(c)) throw Error(ErrorCode::contract, kModule, "locations must be finite");
  return expect_under_process(a, p0, std::vector<double>(locs.begin(), locs.end()),
                              [&](double y) { return mixture_log_density(y, w, locs); });
}

double elpd_true(double a, double p0) {
  check_parameters(a, p0);
  return expect_under_process(a, p0, {}, [&](double y) { return std::log(process_density(y, a, p0)); });
}

MixtureOptimum optimal_mixture(double a, double p0, std::span<const double> locs) {
  check_parameters(a, p0);
  if (locs.empty()) throw Error(ErrorCode::contract, kModule, "need at least one location");
  const auto rule = process_rule(a, p0, std::vector<double>(locs.begin(), locs.end()));
  MixtureElpd objective(rule, locs);
  const auto opt = maximize_on_simplex(objective, SimplexOptions{1e-12, 10000, 100});
  if (!opt.converged) throw Error(ErrorCode::convergence, kModule, "mixture weight optimization did not converge");
  auto weights = ChainWeights::normalized(std::vector<double>(opt.w.data(), opt.w.data() + opt.w.size()));
  const double elpd = elpd_mixture(a, p0, weights, locs);
  return {std::move(weights), elpd};
}

MetropolisResult rw_metropolis(std::span<const double> data, double init, std::size_t draws, double step,
                               std::uint64_t seed, std::string chain_id, std::size_t warmup) {
  if (draws < 2) throw Error(ErrorCode::too_few_draws, kModule, "need at least 2 draws");
  if (!(step > 0.0)) throw Error(ErrorCode::domain, kModule, "step must be positive");
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix ll(static_cast<Eigen::Index>(draws), n);
  ParamTable params{{"mu"}, Matrix(static_cast<Eigen::Index>(draws), 1)};

  auto log_target = [&](double mu) {
    double acc = 0.0;
    for (double y : data) acc -= std::log1p((y - mu) * (y - mu));
    return acc;
  };
  auto propose = [step](double mu, CounterRng& r) { return mu + step * r.normal(); };

  std::optional<double> last_mu;
  Eigen::Index last_row = -1;
  auto record = [&](double mu, std::size_t s) {
    if (s < warmup) return;
    const auto row = static_cast<Eigen::Index>(s - warmup);
    params.values(row, 0) = mu;
    if (last_mu && *last_mu == mu) {
      ll.row(row) = ll.row(last_row);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) ll(row, i) = log_lik(data[static_cast<std::size_t>(i)], mu);
    }
    last_mu = mu;
    last_row = row;
  };

  CounterRng rng(seed);
  const auto accepted = metropolis(init, warmup + draws, log_target, propose, record, rng);
  const double rate = static_cast<double>(accepted) / static_cast<double>(warmup + draws);
  return {ChainDraws(std::move(chain_id), std::move(ll), std::move(params)), rate};
}

std::vector<double> grid_posterior(std::span<const double> data, std::span<const double> mu_grid) {
  const std::size_t m = mu_grid.size();
  if (m < 2) throw Error(ErrorCode::contract, kModule, "grid needs at least two nodes");
  if (!std::is_sorted(mu_grid.begin(), mu_grid.end())) throw Error(ErrorCode::contract, kModule, "grid must be sorted");
  std::vector<double> log_mass(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double left = j == 0 ? mu_grid[0] : mu_grid[j - 1];
    const double right = j + 1 == m ? mu_grid[m - 1] : mu_grid[j + 1];
    const double cell = 0.5 * (right - left);
    double lp = 0.0;
    for (double y : data) lp -= std::log1p((y - mu_grid[j]) * (y - mu_grid[j]));
    log_mass[j] = cell > 0.0 ? lp + std::log(cell) : -std::numeric_limits<double>::infinity();
  }
  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  if (!std::isfinite(top)) throw Error(ErrorCode::numerical_failure, kModule, "grid posterior cannot be normalized");
  double total = 0.0;
  for (double& v : log_mass) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : log_mass) v /= total;
  return log_mass;
}

SimulatedRun simulate(const Scenario& sc, const SimulationSettings& settings) {
  sc.validate();
  if (settings.chains == 0) throw Error(ErrorCode::contract, kModule, "need at least one chain");
  auto data = generate_data(sc);
  std::vector<double> inits(settings.chains);
  for (std::size_t c = 0; c < settings.chains; ++c) inits[c] = c % 2 == 0 ? sc.a : -sc.a;

  std::vector<std::optional<MetropolisResult>> results(settings.chains);
  parallel_for(settings.chains, settings.threads, [&](std::size_t c) {
    results[c] = rw_metropolis(data, inits[c], settings.draws, settings.step, derive_seed(sc.seed, c + 1),
                               "chain" + std::to_string(c + 1), settings.warmup);
  });

  std::vector<ChainDraws> chains;
  std::vector<double> acceptance;
  for (auto& r : results) {
    acceptance.push_back(r->acceptance_rate);
    chains.push_back(std::move(r->chain));
  }
  return {sc, std::move(data), std::move(inits), std::move(acceptance), assemble(std::move(chains))};
}

}  // namespace chainstack::cauchy
