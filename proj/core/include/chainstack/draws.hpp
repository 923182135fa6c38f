#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chainstack {

/// Draw-major numeric table: one row per posterior draw.
using Matrix = Eigen::MatrixXd;

/// Optional parameter draws of one chain.
struct ParamTable {
  std::vector<std::string> names;  // one per column; empty strings when the CSV had no header
  Matrix values;                   // [draws x parameters]

  std::optional<std::size_t> column(std::string_view name) const;
};

/// Post-warmup output of one run: pointwise log-likelihoods and, optionally,
/// the parameter draws that produced them. Immutable once constructed.
///
/// Invariants: at least two draws; every log-likelihood entry finite; params,
/// when present, have one row per draw.
class ChainDraws {
 public:
  ChainDraws(std::string chain_id, Matrix log_lik, std::optional<ParamTable> params = std::nullopt);

  const std::string& chain_id() const noexcept { return chain_id_; }
  const Matrix& log_lik() const noexcept { return log_lik_; }
  const std::optional<ParamTable>& params() const noexcept { return params_; }

  std::size_t draws() const noexcept { return static_cast<std::size_t>(log_lik_.rows()); }
  std::size_t n_obs() const noexcept { return static_cast<std::size_t>(log_lik_.cols()); }

  /// Copy of this chain under a different identifier.
  ChainDraws renamed(std::string chain_id) const;

  /// Rows [first, first + count) as a new chain.
  ChainDraws rows(std::size_t first, std::size_t count, std::string chain_id) const;

 private:
  std::string chain_id_;
  Matrix log_lik_;
  std::optional<ParamTable> params_;
};

/// Validated collection of chains sharing one observation count.
class DrawSet {
 public:
  const std::vector<ChainDraws>& chains() const noexcept { return chains_; }
  const ChainDraws& chain(std::size_t k) const { return chains_.at(k); }
  std::size_t size() const noexcept { return chains_.size(); }
  std::size_t n_obs() const noexcept { return n_obs_; }
  std::size_t total_draws() const noexcept;
  std::vector<std::size_t> draw_counts() const;

 private:
  friend DrawSet assemble(std::vector<ChainDraws> chains);
  DrawSet(std::vector<ChainDraws> chains, std::size_t n_obs)
      : chains_(std::move(chains)), n_obs_(n_obs) {}

  std::vector<ChainDraws> chains_;
  std::size_t n_obs_;
};

/// Builds a DrawSet, preserving chain order. Throws DimensionMismatch when the
/// chains disagree on the observation count and Contract on an empty list.
DrawSet assemble(std::vector<ChainDraws> chains);

enum class Half { first, second };

/// First floor(S/2) draws or the remaining ceil(S/2).
ChainDraws select_half(const ChainDraws& chain, Half which);

/// Row-concatenation of chains in order. Parameter tables are kept only when
/// every input has one with the same column count.
ChainDraws concat_rows(std::span<const ChainDraws> chains, std::string chain_id);

/// Scalar function of the parameters evaluated at every draw of one chain.
using EstimandSeries = std::vector<double>;

}  // namespace chainstack
