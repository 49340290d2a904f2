#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dechw/errors.hpp"

namespace dechw {

// When the per-index weight denominator sum_j H_j,n falls at or below this,
// the index is aggregated by the size-weighted fallback branch. This is the
// operative reading of the hybrid rule's "otherwise" case: the literal
// weights always sum to 1 whenever they are defined, so the reachable
// degenerate condition is a (near-)zero denominator.
inline constexpr double kFallbackEps = 1e-12;

// One participant's contribution to an aggregation step: the sender's
// previous-round parameters, its accumulated Hessian diagonal when the
// strategy exchanges one, and its local dataset size.
template <typename Scalar>
struct NeighborBundle {
  int sender = -1;
  std::span<const Scalar> params;
  std::span<const Scalar> hessian;  // empty when not exchanged
  long dataset_size = 0;

  bool has_hessian() const { return !hessian.empty(); }
};

struct AggregationStats {
  std::size_t fallback_count = 0;  // indices aggregated by the size-weighted branch
  int participants = 0;            // N = |neighborhood| + 1
};

template <typename Scalar>
struct AggregationOutcome {
  std::vector<Scalar> params;
  AggregationStats stats;
};

namespace detail {

template <typename Scalar>
std::size_t checked_param_length(std::span<const NeighborBundle<Scalar>> bundles) {
  if (bundles.empty()) throw DimensionError("aggregation needs at least one bundle");
  std::size_t m = bundles.front().params.size();
  for (std::size_t j = 1; j < bundles.size(); ++j) {
    if (bundles[j].params.size() != m)
      throw DimensionError("bundle from node " + std::to_string(bundles[j].sender) +
                           " has mismatched parameter length");
    if (bundles[j].sender <= bundles[j - 1].sender)
      throw ProtocolError("bundles must be ordered by ascending sender id");
  }
  return m;
}

// Single shared reduction: both strategies and the hybrid fallback run this
// exact loop, so degenerate cases coincide bitwise.
template <typename Scalar>
Scalar weighted_value_at(std::span<const NeighborBundle<Scalar>> bundles,
                         std::span<const double> weights, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < bundles.size(); ++j)
    acc += weights[j] * static_cast<double>(bundles[j].params[n]);
  return static_cast<Scalar>(acc);
}

}  // namespace detail

// tau_j = |D_j| / sum_k |D_k|; uniform when every size is zero.
template <typename Scalar>
std::vector<double> size_weights(std::span<const NeighborBundle<Scalar>> bundles) {
  if (bundles.empty()) throw DimensionError("size_weights needs at least one bundle");
  double total = 0.0;
  for (const auto& b : bundles) total += static_cast<double>(b.dataset_size);
  std::vector<double> tau(bundles.size());
  if (total <= 0.0) {
    double u = 1.0 / static_cast<double>(bundles.size());
    std::fill(tau.begin(), tau.end(), u);
    return tau;
  }
  for (std::size_t j = 0; j < bundles.size(); ++j)
    tau[j] = static_cast<double>(bundles[j].dataset_size) / total;
  return tau;
}

// Size-weighted parameter averaging (decentralized FedAvg). Every index uses
// the fallback weights, so fallback_count == m by convention.
template <typename Scalar>
AggregationOutcome<Scalar> dechetero_aggregate(std::span<const NeighborBundle<Scalar>> bundles) {
  std::size_t m = detail::checked_param_length(bundles);
  std::vector<double> tau = size_weights(bundles);
  AggregationOutcome<Scalar> out;
  out.params.resize(m);
  for (std::size_t n = 0; n < m; ++n)
    out.params[n] = detail::weighted_value_at(bundles, tau, n);
  out.stats.fallback_count = m;
  out.stats.participants = static_cast<int>(bundles.size());
  return out;
}

// Per-parameter sensitivity weights p_j,n = H_j,n / sum_k H_k,n, or an empty
// optional when the denominator is (near) zero and the hybrid rule falls back
// to size weights.
template <typename Scalar>
std::optional<std::vector<double>> hessian_weights(std::span<const NeighborBundle<Scalar>> bundles,
                                                   std::size_t n) {
  double denom = 0.0;
  for (const auto& b : bundles) {
    if (!b.has_hessian())
      throw ProtocolError("bundle from node " + std::to_string(b.sender) +
                          " carries no Hessian diagonal");
    denom += static_cast<double>(b.hessian[n]);
  }
  if (denom <= kFallbackEps) return std::nullopt;
  std::vector<double> p(bundles.size());
  for (std::size_t j = 0; j < bundles.size(); ++j)
    p[j] = static_cast<double>(bundles[j].hessian[n]) / denom;
  return p;
}

// Hybrid Hessian-weighted aggregation: per index, sensitivity weights where
// the accumulated diagonals carry signal, size-weighted averaging where they
// do not.
template <typename Scalar>
AggregationOutcome<Scalar> dechw_aggregate(std::span<const NeighborBundle<Scalar>> bundles) {
  std::size_t m = detail::checked_param_length(bundles);
  for (const auto& b : bundles) {
    if (!b.has_hessian())
      throw ProtocolError("dechw aggregation: bundle from node " + std::to_string(b.sender) +
                          " carries no Hessian diagonal");
    if (b.hessian.size() != m)
      throw DimensionError("dechw aggregation: Hessian length mismatch from node " +
                           std::to_string(b.sender));
  }

  std::vector<double> tau = size_weights(bundles);
  std::vector<double> p(bundles.size());
  AggregationOutcome<Scalar> out;
  out.params.resize(m);
  out.stats.participants = static_cast<int>(bundles.size());

  for (std::size_t n = 0; n < m; ++n) {
    double denom = 0.0;
    for (const auto& b : bundles) denom += static_cast<double>(b.hessian[n]);
    if (denom > kFallbackEps) {
      for (std::size_t j = 0; j < bundles.size(); ++j)
        p[j] = static_cast<double>(bundles[j].hessian[n]) / denom;
      out.params[n] = detail::weighted_value_at(bundles, p, n);
    } else {
      out.params[n] = detail::weighted_value_at(bundles, tau, n);
      out.stats.fallback_count++;
    }
  }
  return out;
}

}  // namespace dechw
