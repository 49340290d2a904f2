#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "dechw/errors.hpp"

namespace dechw {

// Dense row-major tensor. The first extent is the batch/sample axis wherever a
// batch is involved.
template <typename Scalar>
struct Tensor {
  std::vector<int> shape;
  std::vector<Scalar> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<Scalar> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel() != data.size()) throw DimensionError("tensor data length does not match shape");
  }

  static Tensor zeros(std::vector<int> s) {
    std::size_t n = 1;
    for (int e : s) {
      if (e <= 0) throw DimensionError("tensor extents must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return Tensor(std::move(s), std::vector<Scalar>(n, Scalar(0)));
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    return shape.empty() ? 0 : n;
  }

  int extent(std::size_t axis) const { return shape.at(axis); }

  // Extents excluding the leading batch axis.
  std::vector<int> sample_shape() const {
    if (shape.empty()) throw DimensionError("tensor has no batch axis");
    return std::vector<int>(shape.begin() + 1, shape.end());
  }

  std::size_t sample_numel() const {
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) n *= static_cast<std::size_t>(shape[i]);
    return n;
  }

  Scalar* sample(std::size_t i) { return data.data() + i * sample_numel(); }
  const Scalar* sample(std::size_t i) const { return data.data() + i * sample_numel(); }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  return shape.empty() ? 0 : n;
}

}  // namespace dechw
