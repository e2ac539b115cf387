#pragma once

#include "mendr/linalg/matrix.hpp"
#include "mendr/rng.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr {

// ---- BiMap: A -> W A W^T with W having orthonormal rows ----

SpdMatrix bimap_forward(const Matrix& w, const SpdMatrix& a);
Matrix bimap(const Matrix& w, const Matrix& a);

struct BimapGrads {
  Matrix grad_w;
  Matrix grad_a;
};

// grad_W = G W A^T + G^T W A, grad_A = W^T G W
BimapGrads bimap_backward(const Matrix& w, const Matrix& a, const Matrix& grad_out);

// ---- Stiefel manifold of row-orthonormal matrices ----

// Projects a Euclidean gradient onto the tangent space at W:
// G - sym(G W^T) W.
Matrix stiefel_grad(const Matrix& w, const Matrix& eucl_grad);

// Gamma(W - eta * tangent), with Gamma the thin QR factor of the transpose
// (positive R diagonal). Throws DegenerateStep on a rank-deficient step.
Matrix stiefel_retract(const Matrix& w, double eta, const Matrix& tangent);

// Orthonormalizes the rows of m (Gram-Schmidt with reorthogonalization).
Matrix orthonormalize_rows(const Matrix& m);

// QR of a standard Gaussian matrix.
Matrix stiefel_init(std::size_t rows, std::size_t cols, Rng& rng);

// ||W W^T - I||_F
double orthonormality_error(const Matrix& w);

// ---- Cholesky-factored SPD parameter M = L L^T ----

Matrix cholesky_product(const Matrix& l);
// (G + G^T) L
Matrix cholesky_param_grad(const Matrix& l, const Matrix& grad_m);

inline constexpr double kCholeskyDetFloor = 1e-12;
inline constexpr double kCholeskyJitter = 1e-6;

// Adds jitter to the diagonal when |det L| is at or below the floor.
// Returns true when L was changed.
bool cholesky_rejitter(Matrix& l);

}  // namespace mendr
