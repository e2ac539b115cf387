#include "mendr/autodiff/spectral.hpp"

#include <cmath>

#include "mendr/error.hpp"

namespace mendr {

namespace {

void check_grads(const EigenDecomposition& d, std::span<const double> gl, const Matrix& gu) {
  const std::size_t n = d.dim();
  require(gl.size() == n, ErrorKind::ShapeError, "eig_backward: eigenvalue gradient length");
  require(gu.rows() == n && gu.cols() == n, ErrorKind::ShapeError,
          "eig_backward: eigenvector gradient shape");
  for (double v : gl)
    require(std::isfinite(v), ErrorKind::InvalidInput, "eig_backward: non-finite gradient");
  require(all_finite(gu), ErrorKind::InvalidInput, "eig_backward: non-finite gradient");
}

double signed_eps(double gap, double eps) { return gap < 0.0 ? -eps : eps; }

// (f(a) - f(b)) / (a - b) evaluated without cancellation.
double divided_difference(SpectralFn fn, double a, double b) {
  const double d = a - b;
  switch (fn) {
    case SpectralFn::log:
      if (std::abs(d) <= 1e-14 * std::max(a, b)) return 2.0 / (a + b);
      return std::log1p(d / b) / d;
    case SpectralFn::exp:
      if (d == 0.0) return std::exp(a);
      return std::exp(b) * std::expm1(d) / d;
  }
  return 0.0;
}

}  // namespace

Matrix eig_coupling(std::span<const double> values, const StabilizationConfig& cfg) {
  const std::size_t n = values.size();
  Matrix f(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (cfg.mode == StabilizationMode::eigh) {
        const double gap = values[j] - values[i];
        f(i, j) = 1.0 / (gap + signed_eps(gap, cfg.eps_eigh));
      } else {
        const double gap = values[j] * values[j] - values[i] * values[i];
        f(i, j) = gap / (gap * gap + cfg.eps_svd);
      }
    }
  }
  return f;
}

SymmetricMatrix eig_backward_with_coupling(const EigenDecomposition& decomp,
                                           std::span<const double> grad_eigvals,
                                           const Matrix& grad_eigvecs, const Matrix& coupling,
                                           const StabilizationConfig& cfg) {
  check_grads(decomp, grad_eigvals, grad_eigvecs);
  const std::size_t n = decomp.dim();
  const Matrix& u = decomp.vectors;
  const Matrix x = matmul_tn(u, grad_eigvecs);
  Matrix mid(n, n);
  if (cfg.mode == StabilizationMode::eigh) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) mid(i, j) = coupling(i, j) * x(i, j);
  } else {
    // (F o (X - X^T)) S
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        mid(i, j) = coupling(i, j) * (x(i, j) - x(j, i)) * decomp.values[j];
  }
  for (std::size_t i = 0; i < n; ++i) mid(i, i) += grad_eigvals[i];
  return SymmetricMatrix(matmul_nt(matmul(u, mid), u));
}

SymmetricMatrix eig_backward(const EigenDecomposition& decomp, std::span<const double> grad_eigvals,
                             const Matrix& grad_eigvecs, const StabilizationConfig& cfg) {
  require(cfg.eps_eigh > 0.0 && cfg.eps_svd > 0.0, ErrorKind::InvalidInput,
          "stabilization eps must be positive");
  return eig_backward_with_coupling(decomp, grad_eigvals, grad_eigvecs,
                                    eig_coupling(decomp.values, cfg), cfg);
}

namespace {

// Chain rule for <G, U f(L) U^T> through (lambda, U).
SymmetricMatrix function_backward(const EigenDecomposition& d, const SymmetricMatrix& grad_out,
                                  double (*f)(double), double (*fp)(double),
                                  const StabilizationConfig& cfg) {
  const std::size_t n = d.dim();
  require(grad_out.dim() == n, ErrorKind::ShapeError, "matrix function backward: shape mismatch");
  const Matrix& g = grad_out.matrix();
  const Matrix gu = matmul(g, d.vectors);
  std::vector<double> fl(n), gl(n);
  for (std::size_t i = 0; i < n; ++i) fl[i] = f(d.values[i]);
  Matrix grad_u(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) grad_u(r, c) = 2.0 * gu(r, c) * fl[c];
  for (std::size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (std::size_t r = 0; r < n; ++r) q += d.vectors(r, i) * gu(r, i);
    gl[i] = q * fp(d.values[i]);
  }
  return eig_backward(d, gl, grad_u, cfg);
}

double log_fn(double x) { return std::log(x); }
double log_deriv(double x) { return 1.0 / x; }
double exp_fn(double x) { return std::exp(x); }

}  // namespace

SymmetricMatrix spd_log_backward(const SpdMatrix& a, const SymmetricMatrix& grad_out,
                                 const StabilizationConfig& cfg) {
  return function_backward(a.eigen(), grad_out, log_fn, log_deriv, cfg);
}

SymmetricMatrix spd_exp_backward(const SymmetricMatrix& s, const SymmetricMatrix& grad_out,
                                 const StabilizationConfig& cfg) {
  return function_backward(sym_eig(s), grad_out, exp_fn, exp_fn, cfg);
}

Matrix spectral_backward(const EigenDecomposition& decomp, SpectralFn fn, const Matrix& grad_out) {
  const std::size_t n = decomp.dim();
  require(grad_out.rows() == n && grad_out.cols() == n, ErrorKind::ShapeError,
          "spectral_backward: shape mismatch");
  const Matrix& u = decomp.vectors;
  Matrix mid = matmul(matmul_tn(u, symmetrized(grad_out)), u);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double k = divided_difference(fn, decomp.values[i], decomp.values[j]);
      mid(i, j) *= k;
      if (i != j) mid(j, i) *= k;
    }
  return symmetrized(matmul_nt(matmul(u, mid), u));
}

Matrix trace_norm_backward(const Matrix& a, const Matrix& grad_out, double eps) {
  const double s = trace(a) + eps;
  Matrix g = grad_out * (1.0 / s);
  const double c = inner(grad_out, a) / (s * s);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= c;
  return g;
}

}  // namespace mendr
