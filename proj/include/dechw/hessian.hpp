#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "dechw/data.hpp"
#include "dechw/model.hpp"
#include "dechw/train.hpp"

namespace dechw {

// Norms at or below this are treated as zero when normalizing a Hessian
// diagonal; the normalized contribution is then the zero vector.
inline constexpr double kHessNormEps = 1e-12;

// Gauss-Newton estimate of the loss Hessian diagonal: the mean over sampled
// examples of the element-wise squared per-sample gradient, i.e.
// diag(J^T J) / S. Entries are non-negative by construction.
template <typename Scalar>
struct RawHessianDiag {
  std::vector<Scalar> values;
  double norm = 0.0;        // L2 norm of values
  bool empty_sample_set = false;

  bool zero_norm() const { return norm <= kHessNormEps; }
};

// Folds per-sample gradient rows without ever materializing the Jacobian.
template <typename Scalar>
class GnDiagAccumulator {
 public:
  explicit GnDiagAccumulator(std::size_t m) : sum_sq_(m, 0.0) {}

  void add_gradient_row(std::span<const Scalar> row) {
    if (row.size() != sum_sq_.size()) throw DimensionError("gradient row length mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      double g = static_cast<double>(row[i]);
      sum_sq_[i] += g * g;
    }
    ++rows_;
  }

  int rows() const { return rows_; }

  RawHessianDiag<Scalar> finalize() const {
    RawHessianDiag<Scalar> out;
    out.values.resize(sum_sq_.size());
    out.empty_sample_set = rows_ == 0;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < sum_sq_.size(); ++i) {
      double v = rows_ > 0 ? sum_sq_[i] / rows_ : 0.0;
      out.values[i] = static_cast<Scalar>(v);
      norm2 += v * v;
    }
    out.norm = std::sqrt(norm2);
    return out;
  }

 private:
  std::vector<double> sum_sq_;
  int rows_ = 0;
};

// Convenience over explicit rows; used by tests with hand-built gradients.
template <typename Scalar>
RawHessianDiag<Scalar> gn_diag_from_gradients(const std::vector<std::vector<Scalar>>& rows,
                                              std::size_t m) {
  GnDiagAccumulator<Scalar> acc(m);
  for (const auto& r : rows) acc.add_gradient_row(std::span<const Scalar>(r));
  return acc.finalize();
}

// Estimates the diagonal on a seeded subsample of the partition (the whole
// partition when the budget covers it). An empty partition yields a flagged
// all-zero diagonal.
template <typename Scalar>
RawHessianDiag<Scalar> estimate_gn_diag(std::span<const Scalar> params, const ResolvedModel& rm,
                                        const Dataset& ds, const DataPartition& partition,
                                        int sample_budget, std::mt19937_64& rng,
                                        Workspace<Scalar>& ws) {
  if (sample_budget < 1) throw ConfigError("hessian sample budget must be >= 1");
  GnDiagAccumulator<Scalar> acc(rm.param_count);
  if (partition.indices.empty()) return acc.finalize();

  std::vector<int> chosen = partition.indices;
  if (static_cast<int>(chosen.size()) > sample_budget) {
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(sample_budget);
  }

  std::vector<Scalar> grad(rm.param_count);
  std::vector<int> one_label(1);
  for (int idx : chosen) {
    std::span<const int> one_idx(&idx, 1);
    Tensor<Scalar> sample = gather_batch<Scalar>(ds, one_idx);
    one_label[0] = ds.labels[idx];
    loss_and_gradient<Scalar>(params, rm, sample, one_label, grad, ws);
    acc.add_gradient_row(std::span<const Scalar>(grad));
  }
  return acc.finalize();
}

// H / ||H||_2, or the zero vector when the norm is (near) zero.
template <typename Scalar>
std::vector<Scalar> normalize(const RawHessianDiag<Scalar>& raw) {
  std::vector<Scalar> out(raw.values.size(), Scalar(0));
  if (raw.zero_norm()) return out;
  double inv = 1.0 / raw.norm;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<Scalar>(static_cast<double>(raw.values[i]) * inv);
  return out;
}

// Running accumulator for the normalized diagonal. With accumulation enabled
// each round adds beta * H/||H||; the ablation keeps only the current round's
// normalized diagonal.
template <typename Scalar>
struct HessianState {
  std::vector<Scalar> accumulated;
  double beta = 1.0;
  int rounds_absorbed = 0;
  bool no_accumulation = false;

  HessianState() = default;
  HessianState(std::size_t m, double b, bool no_accum = false)
      : accumulated(m, Scalar(0)), beta(b), no_accumulation(no_accum) {
    if (b < 0.0 || b > 1.0) throw ConfigError("beta must lie in [0,1]");
  }
};

template <typename Scalar>
void accumulate(HessianState<Scalar>& state, const RawHessianDiag<Scalar>& raw) {
  if (state.accumulated.size() != raw.values.size())
    throw DimensionError("hessian accumulate: length mismatch");
  std::vector<Scalar> unit = normalize(raw);
  if (state.no_accumulation) {
    state.accumulated = std::move(unit);
  } else {
    for (std::size_t i = 0; i < unit.size(); ++i)
      state.accumulated[i] += static_cast<Scalar>(state.beta * static_cast<double>(unit[i]));
  }
  state.rounds_absorbed++;
}

template <typename Scalar>
std::vector<double> diag_norm_series(const std::vector<RawHessianDiag<Scalar>>& history) {
  std::vector<double> out;
  out.reserve(history.size());
  for (const auto& raw : history) out.push_back(raw.norm);
  return out;
}

}  // namespace dechw
