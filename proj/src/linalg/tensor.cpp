#include "mendr/linalg/tensor.hpp"

#include <algorithm>

namespace mendr {

Tensor3 Tensor3::from_matrix(const Matrix& m) {
  Tensor3 t(1, m.rows(), m.cols());
  std::copy(m.values().begin(), m.values().end(), t.data.begin());
  return t;
}

Matrix Tensor3::channel(std::size_t i) const {
  Matrix m(h, w);
  std::copy_n(plane(i), h * w, m.data());
  return m;
}

}  // namespace mendr
