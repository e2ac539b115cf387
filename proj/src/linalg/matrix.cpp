#include "mendr/linalg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mendr/error.hpp"
#include "mendr/simd/kernels.hpp"

namespace mendr {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeError,
          std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()));
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorKind::ShapeError, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& other) {
  check_same_shape(*this, other, "operator+=");
  simd::active().axpy(1.0, other.data(), data(), size());
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  check_same_shape(*this, other, "operator-=");
  simd::active().axpy(-1.0, other.data(), data(), size());
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::ShapeError, "matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  simd::active().gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::ShapeError, "matmul_nt: inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  simd::active().gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::ShapeError, "matmul_tn: inner dimension mismatch");
  Matrix c(a.cols(), b.cols());
  const auto& k = simd::active();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* bp = b.data() + p * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a(p, i);
      if (api != 0.0) k.axpy(api, bp, c.data() + i * c.cols(), c.cols());
    }
  }
  return c;
}

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c, double alpha) {
  require(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols(),
          ErrorKind::ShapeError, "matmul_acc: shape mismatch");
  if (alpha == 1.0) {
    simd::active().gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  } else {
    Matrix tmp = matmul(a, b);
    simd::active().axpy(alpha, tmp.data(), c.data(), c.size());
  }
}

Matrix congruence_diag(const Matrix& u, std::span<const double> d) {
  require(u.cols() == d.size(), ErrorKind::ShapeError, "congruence_diag: size mismatch");
  Matrix scaled = u;
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < u.cols(); ++j) scaled(i, j) *= d[j];
  return matmul_nt(scaled, u);
}

Matrix congruence(const Matrix& w, const Matrix& a) { return matmul_nt(matmul(w, a), w); }

double trace(const Matrix& a) {
  require(a.is_square(), ErrorKind::ShapeError, "trace of non-square matrix");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  return std::sqrt(simd::active().dot(a.data(), a.data(), a.size()));
}

double inner(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "inner");
  return simd::active().dot(a.data(), b.data(), a.size());
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

Matrix symmetrized(const Matrix& a) {
  require(a.is_square(), ErrorKind::ShapeError, "symmetrize non-square matrix");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](double v) { return std::isfinite(v); });
}

double determinant(const Matrix& a) {
  require(a.is_square(), ErrorKind::ShapeError, "determinant of non-square matrix");
  Matrix lu = a;
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (lu(piv, k) == 0.0) return 0.0;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      det = -det;
    }
    det *= lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }
  return det;
}

}  // namespace mendr
