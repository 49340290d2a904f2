#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dechw/errors.hpp"
#include "dechw/rng.hpp"
#include "dechw/tensor.hpp"

namespace dechw {

struct Dataset {
  Tensor<float> features;  // (num_samples, ...) with values in [0,1] for image data
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return features.shape.empty() ? 0 : features.extent(0); }
};

struct DataPartition {
  int owner = -1;
  std::vector<int> indices;

  int size() const { return static_cast<int>(indices.size()); }
};

struct PartitionSpec {
  double alpha = 0.5;
  std::uint64_t seed = 1;
  int min_samples_per_node = 1;
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IngestError("truncated IDX header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST family container): big-endian dimensions,
// one unsigned byte per pixel and per label. Pixels are scaled by 1/255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IngestError("cannot open IDX image file " + images_path);
  std::uint32_t magic = detail::read_be_u32(img, images_path);
  if (magic != 0x00000803u)
    throw IngestError("bad IDX image magic in " + images_path + " (expected 0x00000803)");
  std::uint32_t n = detail::read_be_u32(img, images_path);
  std::uint32_t rows = detail::read_be_u32(img, images_path);
  std::uint32_t cols = detail::read_be_u32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IngestError("cannot open IDX label file " + labels_path);
  std::uint32_t lmagic = detail::read_be_u32(lab, labels_path);
  if (lmagic != 0x00000801u)
    throw IngestError("bad IDX label magic in " + labels_path + " (expected 0x00000801)");
  std::uint32_t ln = detail::read_be_u32(lab, labels_path);
  if (ln != n)
    throw IngestError("sample count mismatch: " + images_path + " has " + std::to_string(n) +
                      ", " + labels_path + " has " + std::to_string(ln));

  std::size_t pixels = std::size_t(n) * rows * cols;
  std::vector<unsigned char> raw(pixels);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
  if (!img) throw IngestError("truncated IDX image payload in " + images_path);

  std::vector<unsigned char> lraw(n);
  lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(n));
  if (!lab) throw IngestError("truncated IDX label payload in " + labels_path);

  Dataset ds;
  ds.features.shape = {static_cast<int>(n), static_cast<int>(rows), static_cast<int>(cols)};
  ds.features.data.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) ds.features.data[i] = raw[i] * (1.0f / 255.0f);
  ds.labels.resize(n);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.labels[i] = lraw[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

// Gaussian blobs: one unit-variance cluster per class, centered on a seeded
// random direction scaled by class_separation. Samples are emitted
// class-major, so a leading slice per class is a distribution-matched split.
inline Dataset gen_synthetic(int num_classes, int samples_per_class, int input_dim,
                             double class_separation, std::uint64_t seed) {
  if (num_classes < 1 || samples_per_class < 1 || input_dim < 1)
    throw ConfigError("synthetic dataset needs positive counts");

  std::mt19937_64 rng = make_rng({seed, stream::kSyntheticData});
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(input_dim));
  for (auto& c : centers) {
    double norm2 = 0.0;
    for (double& v : c) {
      v = gauss(rng);
      norm2 += v * v;
    }
    double scale = norm2 > 0 ? class_separation / std::sqrt(norm2) : 0.0;
    for (double& v : c) v *= scale;
  }

  int n = num_classes * samples_per_class;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.features.shape = {n, input_dim};
  ds.features.data.resize(std::size_t(n) * input_dim);
  ds.labels.resize(n);
  std::size_t pos = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < samples_per_class; ++s) {
      int idx = c * samples_per_class + s;
      ds.labels[idx] = c;
      for (int d = 0; d < input_dim; ++d)
        ds.features.data[pos++] = static_cast<float>(centers[c][d] + gauss(rng));
    }
  }
  return ds;
}

// Keeps the first train_per_class samples of each class, moving the rest into
// a held-out test set drawn from the same cluster centers.
inline std::pair<Dataset, Dataset> split_by_class_position(const Dataset& ds, int train_per_class) {
  Dataset train, test;
  train.num_classes = test.num_classes = ds.num_classes;
  std::vector<int> seen(ds.num_classes, 0);
  std::vector<int> train_idx, test_idx;
  for (int i = 0; i < ds.size(); ++i) {
    int c = ds.labels[i];
    if (seen[c]++ < train_per_class)
      train_idx.push_back(i);
    else
      test_idx.push_back(i);
  }
  auto gather = [&](const std::vector<int>& idx) {
    Dataset out;
    out.num_classes = ds.num_classes;
    std::vector<int> shape = ds.features.shape;
    shape[0] = static_cast<int>(idx.size());
    out.features.shape = shape;
    std::size_t per = ds.features.sample_numel();
    out.features.data.resize(idx.size() * per);
    out.labels.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(ds.features.sample(idx[k]), per, out.features.data.data() + k * per);
      out.labels[k] = ds.labels[idx[k]];
    }
    return out;
  };
  return {gather(train_idx), gather(test_idx)};
}

// Per-class Dirichlet allocation: for every class a proportion vector
// q ~ Dir(alpha * 1) is drawn and the class's samples are split by
// largest-remainder rounding of q * class_count. Nodes left under
// min_samples_per_node are topped up from the largest partition.
inline std::vector<DataPartition> dirichlet_partition(const Dataset& ds, int n_nodes,
                                                      const PartitionSpec& spec) {
  if (n_nodes < 1) throw ConfigError("partitioning needs n_nodes >= 1");
  if (!(spec.alpha > 0)) throw ConfigError("partition.alpha must be positive");
  if (spec.min_samples_per_node < 0) throw ConfigError("partition.min_samples_per_node must be >= 0");
  if (static_cast<long long>(n_nodes) * spec.min_samples_per_node > ds.size())
    throw ConfigError("partition.min_samples_per_node unsatisfiable: " + std::to_string(n_nodes) +
                      " nodes need more than " + std::to_string(ds.size()) + " samples");

  std::mt19937_64 rng = make_rng({spec.seed, stream::kPartition});
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);

  std::vector<std::vector<int>> by_class(ds.num_classes);
  for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  std::vector<DataPartition> parts(n_nodes);
  for (int i = 0; i < n_nodes; ++i) parts[i].owner = i;

  for (int c = 0; c < ds.num_classes; ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<double> q(n_nodes);
    double total = 0.0;
    for (double& v : q) {
      v = gamma(rng);
      total += v;
    }
    if (total <= 0.0) {
      std::fill(q.begin(), q.end(), 1.0);
      total = n_nodes;
    }
    for (double& v : q) v /= total;

    // Largest-remainder rounding preserves the class total exactly.
    int n_c = static_cast<int>(pool.size());
    std::vector<int> counts(n_nodes);
    std::vector<std::pair<double, int>> remainders(n_nodes);
    int assigned = 0;
    for (int j = 0; j < n_nodes; ++j) {
      double ideal = q[j] * n_c;
      counts[j] = static_cast<int>(std::floor(ideal));
      assigned += counts[j];
      remainders[j] = {ideal - counts[j], j};
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < n_c - assigned; ++k) counts[remainders[k].second]++;

    int cursor = 0;
    for (int j = 0; j < n_nodes; ++j) {
      parts[j].indices.insert(parts[j].indices.end(), pool.begin() + cursor,
                              pool.begin() + cursor + counts[j]);
      cursor += counts[j];
    }
  }

  // Repair pass: move seeded random samples from the largest partition into
  // any node below the floor.
  for (int j = 0; j < n_nodes; ++j) {
    while (parts[j].size() < spec.min_samples_per_node) {
      int donor = -1;
      for (int k = 0; k < n_nodes; ++k)
        if (donor < 0 || parts[k].size() > parts[donor].size()) donor = k;
      if (donor == j || parts[donor].size() <= spec.min_samples_per_node) break;
      std::uniform_int_distribution<int> pick(0, parts[donor].size() - 1);
      int at = pick(rng);
      parts[j].indices.push_back(parts[donor].indices[at]);
      parts[donor].indices.erase(parts[donor].indices.begin() + at);
    }
  }
  return parts;
}

// Per-node, per-class sample counts; rows sum to |D_i|, columns to class totals.
inline std::vector<std::vector<long>> partition_stats(const std::vector<DataPartition>& parts,
                                                      const Dataset& ds) {
  std::vector<std::vector<long>> table(parts.size(), std::vector<long>(ds.num_classes, 0));
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (int idx : parts[i].indices) table[i][ds.labels[idx]]++;
  return table;
}

// Mean over nodes of the total-variation distance between the node's label
// distribution and the global one. Empty partitions contribute distance 0.
inline double heterogeneity_tv(const std::vector<DataPartition>& parts, const Dataset& ds) {
  if (parts.empty() || ds.size() == 0) return 0.0;
  std::vector<double> global(ds.num_classes, 0.0);
  for (int lab : ds.labels) global[lab] += 1.0;
  for (double& g : global) g /= ds.size();

  auto table = partition_stats(parts, ds);
  double acc = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    long total = parts[i].size();
    if (total == 0) continue;
    double tv = 0.0;
    for (int c = 0; c < ds.num_classes; ++c)
      tv += std::abs(static_cast<double>(table[i][c]) / total - global[c]);
    acc += 0.5 * tv;
  }
  return acc / parts.size();
}

}  // namespace dechw
