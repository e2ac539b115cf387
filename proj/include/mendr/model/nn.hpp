#pragma once

#include <vector>

#include "mendr/linalg/matrix.hpp"
#include "mendr/linalg/tensor.hpp"

// Forward/backward pairs for the Euclidean layers. Backward functions
// accumulate into parameter gradients and return the input gradient.
namespace mendr::nn {

// Y = X W + b, with b a 1 x n row (optional).
Matrix linear(const Matrix& x, const Matrix& w, const Matrix* b = nullptr);
Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& gy, Matrix& gw,
                       Matrix* gb = nullptr);

// Row-wise layer normalization with affine 1 x d gamma and beta.
struct LayerNormCache {
  Matrix xhat;
  std::vector<double> rstd;
};
inline constexpr double kNormEps = 1e-5;
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& cache);
Matrix layer_norm_backward(const Matrix& gy, const Matrix& gamma, const LayerNormCache& cache,
                           Matrix& ggamma, Matrix& gbeta);

double gelu(double x);
double gelu_grad(double x);
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& gy);
void gelu_inplace(Tensor3& t);
void gelu_backward_inplace(const Tensor3& pre, Tensor3& g);

double sigmoid(double x);
double leaky_relu(double x, double slope = 0.2);

// Row-wise softmax and its backward given the softmax output.
Matrix softmax_rows(const Matrix& x);
Matrix softmax_rows_backward(const Matrix& y, const Matrix& gy);

// Group normalization over [channels in group][h][w] with per-channel
// affine gamma, beta (1 x c).
struct GroupNormCache {
  Tensor3 xhat;
  std::vector<double> rstd;  // per group
};
Tensor3 group_norm(const Tensor3& x, std::size_t groups, const Matrix& gamma, const Matrix& beta,
                   GroupNormCache& cache);
Tensor3 group_norm_backward(const Tensor3& gy, std::size_t groups, const Matrix& gamma,
                            const GroupNormCache& cache, Matrix& ggamma, Matrix& gbeta);

// Convolution along w with kernel == stride k, no bias, shared over h.
// W is c_out x (c_in * k), entry (o, i * k + u).
Tensor3 conv_stride(const Tensor3& x, const Matrix& w, std::size_t k);
Tensor3 conv_stride_backward(const Tensor3& x, const Matrix& w, std::size_t k, const Tensor3& gy,
                             Matrix& gw);

// Transposed convolution with kernel == stride k, no bias.
// W is c_in x (c_out * k), entry (i, o * k + u).
Tensor3 conv_transpose_stride(const Tensor3& x, const Matrix& w, std::size_t k);
Tensor3 conv_transpose_stride_backward(const Tensor3& x, const Matrix& w, std::size_t k,
                                       const Tensor3& gy, Matrix& gw);

}  // namespace mendr::nn
