#include "chainstack/draws.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "chainstack/error.hpp"

namespace chainstack {

namespace {
constexpr const char* kModule = "draws-core";
}

std::optional<std::size_t> ParamTable::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return j;
  return std::nullopt;
}

ChainDraws::ChainDraws(std::string chain_id, Matrix log_lik, std::optional<ParamTable> params)
    : chain_id_(std::move(chain_id)), log_lik_(std::move(log_lik)), params_(std::move(params)) {
  if (log_lik_.rows() < 2)
    throw Error(ErrorCode::too_few_draws, kModule,
                "chain needs at least 2 draws, got " + std::to_string(log_lik_.rows()))
        .at(chain_id_);
  for (Eigen::Index i = 0; i < log_lik_.cols(); ++i)
    for (Eigen::Index s = 0; s < log_lik_.rows(); ++s)
      if (!std::isfinite(log_lik_(s, i)))
        throw Error(ErrorCode::contract, kModule, "non-finite log-likelihood entry")
            .at(chain_id_ + " (" + std::to_string(s) + ", " + std::to_string(i) + ")");
  if (params_) {
    if (params_->values.rows() != log_lik_.rows())
      throw Error(ErrorCode::dimension_mismatch, kModule,
                  "parameter table has " + std::to_string(params_->values.rows()) +
                      " rows but log-likelihood has " + std::to_string(log_lik_.rows()))
          .at(chain_id_);
    if (params_->names.empty()) params_->names.assign(params_->values.cols(), std::string{});
    if (params_->names.size() != static_cast<std::size_t>(params_->values.cols()))
      throw Error(ErrorCode::dimension_mismatch, kModule, "parameter names do not match columns")
          .at(chain_id_);
  }
}

ChainDraws ChainDraws::renamed(std::string chain_id) const {
  ChainDraws copy = *this;
  copy.chain_id_ = std::move(chain_id);
  return copy;
}

ChainDraws ChainDraws::rows(std::size_t first, std::size_t count, std::string chain_id) const {
  const auto f = static_cast<Eigen::Index>(first);
  const auto c = static_cast<Eigen::Index>(count);
  std::optional<ParamTable> p;
  if (params_) p = ParamTable{params_->names, params_->values.middleRows(f, c)};
  return ChainDraws(std::move(chain_id), log_lik_.middleRows(f, c), std::move(p));
}

std::size_t DrawSet::total_draws() const noexcept {
  std::size_t total = 0;
  for (const auto& c : chains_) total += c.draws();
  return total;
}

std::vector<std::size_t> DrawSet::draw_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(chains_.size());
  for (const auto& c : chains_) counts.push_back(c.draws());
  return counts;
}

DrawSet assemble(std::vector<ChainDraws> chains) {
  if (chains.empty()) throw Error(ErrorCode::contract, kModule, "cannot assemble an empty chain list");
  const std::size_t n = chains.front().n_obs();
  for (std::size_t k = 1; k < chains.size(); ++k)
    if (chains[k].n_obs() != n)
      throw Error(ErrorCode::dimension_mismatch, kModule,
                  "chain reports " + std::to_string(chains[k].n_obs()) + " observations, expected " +
                      std::to_string(n))
          .at(chains[k].chain_id());
  return DrawSet(std::move(chains), n);
}

ChainDraws select_half(const ChainDraws& chain, Half which) {
  const std::size_t s = chain.draws();
  const std::size_t first = s / 2;
  // Halves are chains too, so each needs two draws (S >= 4 in practice).
  if (which == Half::first) {
    if (first < 2) throw Error(ErrorCode::too_few_draws, kModule, "half too short to form a chain").at(chain.chain_id());
    return chain.rows(0, first, chain.chain_id() + "/1");
  }
  if (s - first < 2) throw Error(ErrorCode::too_few_draws, kModule, "half too short to form a chain").at(chain.chain_id());
  return chain.rows(first, s - first, chain.chain_id() + "/2");
}

ChainDraws concat_rows(std::span<const ChainDraws> chains, std::string chain_id) {
  if (chains.empty()) throw Error(ErrorCode::contract, kModule, "cannot concatenate zero chains");
  const auto n = chains.front().log_lik().cols();
  Eigen::Index rows = 0;
  bool keep_params = true;
  const auto& p0 = chains.front().params();
  for (const auto& c : chains) {
    if (c.log_lik().cols() != n)
      throw Error(ErrorCode::dimension_mismatch, kModule, "observation counts differ").at(c.chain_id());
    rows += c.log_lik().rows();
    keep_params = keep_params && c.params() && p0 && c.params()->values.cols() == p0->values.cols();
  }
  Matrix ll(rows, n);
  std::optional<ParamTable> params;
  if (keep_params) params = ParamTable{p0->names, Matrix(rows, p0->values.cols())};
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    const auto r = c.log_lik().rows();
    ll.middleRows(at, r) = c.log_lik();
    if (params) params->values.middleRows(at, r) = c.params()->values;
    at += r;
  }
  return ChainDraws(std::move(chain_id), std::move(ll), std::move(params));
}

}  // namespace chainstack
