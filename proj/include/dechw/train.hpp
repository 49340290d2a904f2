#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "dechw/data.hpp"
#include "dechw/model.hpp"
#include "dechw/optimizer.hpp"

namespace dechw {

// Copies the referenced samples into a batch tensor of the given scalar type.
template <typename Scalar>
Tensor<Scalar> gather_batch(const Dataset& ds, std::span<const int> indices) {
  std::vector<int> shape = ds.features.shape;
  shape[0] = static_cast<int>(indices.size());
  Tensor<Scalar> out;
  out.shape = shape;
  std::size_t per = ds.features.sample_numel();
  out.data.resize(indices.size() * per);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const float* src = ds.features.sample(indices[k]);
    Scalar* dst = out.data.data() + k * per;
    for (std::size_t i = 0; i < per; ++i) dst[i] = static_cast<Scalar>(src[i]);
  }
  return out;
}

template <typename Scalar>
std::vector<int> gather_labels(const Dataset& ds, std::span<const int> indices) {
  std::vector<int> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) out[k] = ds.labels[indices[k]];
  return out;
}

struct TrainResult {
  double final_epoch_loss = 0.0;  // sample-weighted mean loss over the last epoch
  int batches_run = 0;
};

// Mini-batch SGD over one node's partition: per epoch the sample order is
// reshuffled from the supplied stream and split into batches, keeping the
// final short batch.
template <typename Scalar>
TrainResult local_train(std::span<Scalar> params, OptimizerState<Scalar>& opt,
                        const ResolvedModel& rm, const Dataset& ds,
                        const DataPartition& partition, int epochs, int batch_size,
                        std::mt19937_64& rng, Workspace<Scalar>& ws) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  TrainResult res;
  if (epochs <= 0 || partition.indices.empty()) return res;

  std::vector<int> order = partition.indices;
  std::vector<Scalar> grad(rm.param_count);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      std::size_t len = std::min<std::size_t>(batch_size, order.size() - at);
      std::span<const int> idx(order.data() + at, len);
      Tensor<Scalar> batch = gather_batch<Scalar>(ds, idx);
      std::vector<int> labels = gather_labels<Scalar>(ds, idx);
      double loss = loss_and_gradient<Scalar>(params, rm, batch, labels, grad, ws);
      sgd_step<Scalar>(params, grad, opt);
      epoch_loss += loss * static_cast<double>(len);
      if (e == epochs - 1) res.batches_run++;
    }
    if (e == epochs - 1) res.final_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }
  return res;
}

}  // namespace dechw
