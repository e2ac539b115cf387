#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "mendr/linalg/matrix.hpp"
#include "mendr/rng.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr::testing {

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mendr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, scale);
  return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
  return symmetrized(random_matrix(n, n, rng));
}

// Gram-Schmidt on a Gaussian matrix; rows orthonormal.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q = random_matrix(n, n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) {
        double d = 0;
        for (std::size_t k = 0; k < n; ++k) d += q(i, k) * q(j, k);
        for (std::size_t k = 0; k < n; ++k) q(i, k) -= d * q(j, k);
      }
    double nrm = 0;
    for (std::size_t k = 0; k < n; ++k) nrm += q(i, k) * q(i, k);
    nrm = std::sqrt(nrm);
    for (std::size_t k = 0; k < n; ++k) q(i, k) /= nrm;
  }
  return q;
}

// Q diag(lambda) Q^T with log-uniform eigenvalues in [lo, hi].
inline Matrix random_spd_matrix(std::size_t n, Rng& rng, double lo = 0.1, double hi = 10.0) {
  Matrix q = random_orthogonal(n, rng);
  std::vector<double> d(n);
  for (double& v : d) v = std::exp(rng.uniform(std::log(lo), std::log(hi)));
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += q(k, i) * d[k] * q(k, j);
      out(i, j) = s;
    }
  return symmetrized(out);
}

inline SpdMatrix random_spd(std::size_t n, Rng& rng, double lo = 0.1, double hi = 10.0) {
  return SpdMatrix(random_spd_matrix(n, rng, lo, hi));
}

// Spectrum with well-separated eigenvalues (gap >= min_gap).
inline Matrix spd_with_gap(std::size_t n, Rng& rng, double min_gap) {
  Matrix q = random_orthogonal(n, rng);
  std::vector<double> d(n);
  double v = rng.uniform(0.2, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = v;
    v += min_gap + rng.uniform(0.0, 0.5);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += q(k, i) * d[k] * q(k, j);
      out(i, j) = s;
    }
  return symmetrized(out);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

inline double rel_frob(const Matrix& a, const Matrix& b) {
  return frobenius_norm(a - b) / std::max(1e-12, frobenius_norm(b));
}

}  // namespace mendr::testing

namespace mendr::testing {

// Central differences of f over every entry of m.
template <class F>
Matrix fd_grad(F&& f, const Matrix& m, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  Matrix x = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double fp = f(x);
    x.data()[i] = orig - h;
    const double fm = f(x);
    x.data()[i] = orig;
    g.data()[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Central differences of f over symmetric perturbations; entry (i, j) holds
// the derivative with respect to the shared value of a_ij and a_ji, halved
// off the diagonal so it compares against a symmetrized gradient.
template <class F>
Matrix fd_sym_grad(F&& f, const Matrix& a, double h = 1e-5) {
  const std::size_t n = a.rows();
  Matrix g(n, n);
  Matrix x = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double orig = x(i, j);
      x(i, j) = x(j, i) = orig + h;
      const double fp = f(x);
      x(i, j) = x(j, i) = orig - h;
      const double fm = f(x);
      x(i, j) = x(j, i) = orig;
      const double d = (fp - fm) / (2 * h);
      g(i, j) = g(j, i) = i == j ? d : 0.5 * d;
    }
  }
  return g;
}

}  // namespace mendr::testing
