#pragma once

#include <span>
#include <vector>

#include "mendr/linalg/matrix.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr {

enum class StabilizationMode { svd, eigh };

struct StabilizationConfig {
  double eps_svd = 1e-12;
  double eps_eigh = 1e-20;
  StabilizationMode mode = StabilizationMode::eigh;
};

// Off-diagonal coupling matrix of the eigenvector gradient. In eigh mode
// F_ij = 1 / ((l_j - l_i) + eps * sign(l_j - l_i)); in svd mode
// F_ij = (l_j^2 - l_i^2) / ((l_j^2 - l_i^2)^2 + eps). Diagonal is zero.
Matrix eig_coupling(std::span<const double> values, const StabilizationConfig& cfg);

// dL/dA from dL/dlambda and dL/dU for A = U diag(lambda) U^T, symmetrized.
SymmetricMatrix eig_backward(const EigenDecomposition& decomp, std::span<const double> grad_eigvals,
                             const Matrix& grad_eigvecs, const StabilizationConfig& cfg = {});

// Same, with a caller-provided coupling matrix.
SymmetricMatrix eig_backward_with_coupling(const EigenDecomposition& decomp,
                                           std::span<const double> grad_eigvals,
                                           const Matrix& grad_eigvecs, const Matrix& coupling,
                                           const StabilizationConfig& cfg = {});

// Gradients of <G, log A> and <G, exp S> routed through eig_backward.
SymmetricMatrix spd_log_backward(const SpdMatrix& a, const SymmetricMatrix& grad_out,
                                 const StabilizationConfig& cfg = {});
SymmetricMatrix spd_exp_backward(const SymmetricMatrix& s, const SymmetricMatrix& grad_out,
                                 const StabilizationConfig& cfg = {});

enum class SpectralFn { log, exp };

// Divided-difference form U (K o U^T G U) U^T with K_ij = (f(l_i) - f(l_j)) /
// (l_i - l_j) and K_ii = f'(l_i). Stays finite and exact at repeated
// eigenvalues; used inside the network.
Matrix spectral_backward(const EigenDecomposition& decomp, SpectralFn fn, const Matrix& grad_out);

// Gradient of Y = A / (tr A + eps) + eps I: G / (t + eps) - <G, A> / (t + eps)^2 I.
Matrix trace_norm_backward(const Matrix& a, const Matrix& grad_out, double eps = kSpdEps);

}  // namespace mendr
