#include "mendr/autodiff/manifold_params.hpp"

#include <cmath>
#include <string>

#include "mendr/error.hpp"
#include "mendr/simd/kernels.hpp"

namespace mendr {

Matrix bimap(const Matrix& w, const Matrix& a) {
  require(a.is_square() && w.cols() == a.rows(), ErrorKind::ShapeError,
          "bimap: W is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
              ", A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  return symmetrized(congruence(w, a));
}

SpdMatrix bimap_forward(const Matrix& w, const SpdMatrix& a) {
  return SpdMatrix(bimap(w, a.matrix()));
}

BimapGrads bimap_backward(const Matrix& w, const Matrix& a, const Matrix& grad_out) {
  require(a.is_square() && w.cols() == a.rows(), ErrorKind::ShapeError, "bimap_backward: W/A");
  require(grad_out.rows() == w.rows() && grad_out.cols() == w.rows(), ErrorKind::ShapeError,
          "bimap_backward: upstream gradient shape");
  BimapGrads g;
  g.grad_w = matmul_nt(matmul(grad_out, w), a);
  g.grad_w += matmul(matmul_tn(grad_out, w), a);
  g.grad_a = symmetrized(matmul_tn(w, matmul(grad_out, w)));
  return g;
}

Matrix stiefel_grad(const Matrix& w, const Matrix& eucl_grad) {
  require(w.rows() == eucl_grad.rows() && w.cols() == eucl_grad.cols(), ErrorKind::ShapeError,
          "stiefel_grad: shape mismatch");
  Matrix s = symmetrized(matmul_nt(eucl_grad, w));
  return eucl_grad - matmul(s, w);
}

Matrix orthonormalize_rows(const Matrix& m) {
  require(m.rows() <= m.cols(), ErrorKind::ShapeError, "orthonormalize_rows: more rows than cols");
  const auto& k = simd::active();
  const std::size_t n = m.cols();
  Matrix q = m;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double* qi = q.data() + i * n;
    const double norm0 = std::sqrt(k.dot(qi, qi, n));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double* qj = q.data() + j * n;
        k.axpy(-k.dot(qi, qj, n), qj, qi, n);
      }
    }
    const double norm = std::sqrt(k.dot(qi, qi, n));
    if (!(norm > 1e-10 * norm0) || !(norm > 0.0) || !std::isfinite(norm))
      fail(ErrorKind::DegenerateStep, "retraction: rank-deficient row " + std::to_string(i));
    for (std::size_t c = 0; c < n; ++c) qi[c] /= norm;
  }
  return q;
}

Matrix stiefel_retract(const Matrix& w, double eta, const Matrix& tangent) {
  require(eta >= 0.0, ErrorKind::InvalidInput, "stiefel_retract: negative step");
  require(w.rows() == tangent.rows() && w.cols() == tangent.cols(), ErrorKind::ShapeError,
          "stiefel_retract: shape mismatch");
  Matrix step = w;
  simd::active().axpy(-eta, tangent.data(), step.data(), step.size());
  return orthonormalize_rows(step);
}

Matrix stiefel_init(std::size_t rows, std::size_t cols, Rng& rng) {
  require(rows <= cols, ErrorKind::ShapeError, "stiefel_init: rows must not exceed cols");
  Matrix g(rows, cols);
  for (double& v : g.values()) v = rng.normal();
  return orthonormalize_rows(g);
}

double orthonormality_error(const Matrix& w) {
  return frobenius_norm(matmul_nt(w, w) - Matrix::identity(w.rows()));
}

Matrix cholesky_product(const Matrix& l) {
  require(l.is_square(), ErrorKind::ShapeError, "cholesky factor must be square");
  return symmetrized(matmul_nt(l, l));
}

Matrix cholesky_param_grad(const Matrix& l, const Matrix& grad_m) {
  require(l.is_square() && grad_m.rows() == l.rows() && grad_m.cols() == l.cols(),
          ErrorKind::ShapeError, "cholesky_param_grad: shape mismatch");
  return matmul(grad_m + grad_m.transposed(), l);
}

bool cholesky_rejitter(Matrix& l) {
  if (std::abs(determinant(l)) > kCholeskyDetFloor) return false;
  for (std::size_t d = 0; d < l.rows(); ++d) l(d, d) += kCholeskyJitter;
  return true;
}

}  // namespace mendr
