#pragma once

#include <cstddef>
#include <vector>

#include "mendr/linalg/matrix.hpp"

namespace mendr {

// Dense [channels][rows][cols] array of doubles; the feature layout of the
// convolution stacks (feature maps x electrodes x time).
struct Tensor3 {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), data(c_ * h_ * w_, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data[(i * h + j) * w + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data[(i * h + j) * w + k];
  }
  double* plane(std::size_t i) noexcept { return data.data() + i * h * w; }
  const double* plane(std::size_t i) const noexcept { return data.data() + i * h * w; }
  std::size_t size() const noexcept { return data.size(); }

  // Single-channel tensor from a matrix and back.
  static Tensor3 from_matrix(const Matrix& m);
  Matrix channel(std::size_t i) const;
};

}  // namespace mendr
