#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mendr {

// Dense row-major matrix of doubles with value semantics.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  double* ptr(std::size_t i, std::size_t j) noexcept { return data_.data() + i * cols_ + j; }
  const double* ptr(std::size_t i, std::size_t j) const noexcept {
    return data_.data() + i * cols_ + j;
  }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  Matrix transposed() const;
  void fill(double v);
  void set_zero() { fill(0.0); }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// C += alpha * A * B (shapes checked)
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c, double alpha = 1.0);

// U diag(d) U^T
Matrix congruence_diag(const Matrix& u, std::span<const double> d);
// W A W^T
Matrix congruence(const Matrix& w, const Matrix& a);

double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
// Frobenius inner product sum_ij a_ij b_ij
double inner(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
// (A + A^T) / 2
Matrix symmetrized(const Matrix& a);
bool all_finite(const Matrix& a);

// Determinant through partial-pivot LU.
double determinant(const Matrix& a);

}  // namespace mendr
