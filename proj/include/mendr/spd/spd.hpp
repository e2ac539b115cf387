#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mendr/linalg/matrix.hpp"

namespace mendr {

// Square matrix that is exactly symmetric; construction averages with the
// transpose.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(const Matrix& m);

  // Trusts the caller that m is already exactly symmetric.
  static SymmetricMatrix adopt(Matrix m);

  std::size_t dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // eigenvectors as columns

  std::size_t dim() const noexcept { return values.size(); }
  // U f(diag) U^T, symmetrized.
  Matrix apply(const std::function<double(double)>& f) const;
  Matrix reconstruct() const;
};

// Cyclic Jacobi. Eigenvalues descending, each eigenvector's first entry
// that is not negligible made non-negative.
EigenDecomposition sym_eig(const SymmetricMatrix& a);

class SpdMatrix {
 public:
  SpdMatrix() = default;
  // Symmetrizes and decomposes m; throws NotPositiveDefinite unless the
  // smallest eigenvalue is strictly positive.
  explicit SpdMatrix(const Matrix& m);
  explicit SpdMatrix(const SymmetricMatrix& s);

  // Builds U diag(values) U^T from a decomposition whose values are known to
  // be positive.
  static SpdMatrix from_eigen(EigenDecomposition eig);
  // Pairs a matrix with its known decomposition without recomputing it.
  static SpdMatrix trusted(Matrix m, EigenDecomposition eig);

  std::size_t dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  const EigenDecomposition& eigen() const noexcept { return eig_; }
  double min_eigenvalue() const noexcept { return eig_.values.back(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

 private:
  Matrix m_;
  EigenDecomposition eig_;
};

SymmetricMatrix spd_log(const SpdMatrix& a);
SpdMatrix spd_exp(const SymmetricMatrix& s);

double lem_distance(const SpdMatrix& a, const SpdMatrix& b);
double lem_distance_logs(const Matrix& log_a, const Matrix& log_b);

SpdMatrix log_euclidean_mean(std::span<const SpdMatrix> ms);
// Mean of already computed logarithms, summed in a canonical order.
Matrix mean_of_logs(std::span<const Matrix> logs);

inline constexpr double kSpdEps = 1e-5;

// X X^T / (T - 1) + eps I, then trace normalized. X is channels x time.
SpdMatrix scm(const Matrix& x, double eps = kSpdEps);
// X X^T / (T - 1) + eps I without the normalization.
Matrix scm_raw(const Matrix& x, double eps = kSpdEps);

// A / (tr A + eps) + eps I
SpdMatrix batch_trace_norm(const SpdMatrix& a, double eps = kSpdEps);
Matrix trace_norm(const Matrix& a, double eps = kSpdEps);

// exp(log A + log B)
SpdMatrix riemannian_residual(const SpdMatrix& a, const SpdMatrix& b);

// 1 / (1 + log(1 + d))
double sim_from_distance(double d);
double manifold_sim(const SpdMatrix& a, const SpdMatrix& b);

struct Ellipsoid {
  std::vector<double> eigenvalues;   // descending, top k
  std::vector<double> axis_lengths;  // 2 / sqrt(eigenvalue), same order
  Matrix axis_directions;            // n x k, columns paired with the above
  std::size_t top_k = 3;
};

Ellipsoid ellipsoid_axes(const SpdMatrix& a, std::size_t k = 3);

// Upper triangle of log A, row-major, off-diagonal entries times sqrt(2).
std::vector<double> tangent_features(const SpdMatrix& a);
std::vector<double> tangent_features_of_log(const Matrix& log_a);

}  // namespace mendr
