#include "mendr/spd/spd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mendr/error.hpp"
#include "mendr/simd/kernels.hpp"

namespace mendr {

namespace {

constexpr int kMaxSweeps = 100;

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  require(a == b, ErrorKind::ShapeError,
          std::string(what) + ": dimension mismatch " + std::to_string(a) + " vs " +
              std::to_string(b));
}

// Sorts eigenpairs descending and fixes the sign of each vector. vt holds
// eigenvectors as rows.
EigenDecomposition finish(std::vector<double> values, const Matrix& vt) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] > values[j]; });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.values[c] = values[src];
    auto v = vt.row(src);
    double sign = 1.0;
    for (double x : v) {
      if (std::abs(x) > 1e-14) {
        sign = x < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = sign * v[r];
  }
  return out;
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Matrix& m) : m_(symmetrized(m)) {}

SymmetricMatrix SymmetricMatrix::adopt(Matrix m) {
  require(m.is_square(), ErrorKind::ShapeError, "symmetric matrix must be square");
  SymmetricMatrix s;
  s.m_ = std::move(m);
  return s;
}

Matrix EigenDecomposition::apply(const std::function<double(double)>& f) const {
  std::vector<double> d(values.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = f(values[i]);
  return symmetrized(congruence_diag(vectors, d));
}

Matrix EigenDecomposition::reconstruct() const {
  return apply([](double x) { return x; });
}

EigenDecomposition sym_eig(const SymmetricMatrix& sym) {
  const std::size_t n = sym.dim();
  require(n >= 1, ErrorKind::InvalidInput, "sym_eig: empty matrix");
  require(all_finite(sym.matrix()), ErrorKind::InvalidInput, "sym_eig: non-finite entries");

  const auto& k = simd::active();
  Matrix a = sym.matrix();
  Matrix vt = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off == 0.0) break;

    const double thresh = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(a(p, p)) + g == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + g == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::abs(apq) <= thresh || apq == 0.0) continue;

        const double h = a(q, q) - a(p, p);
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double app = a(p, p) - t * apq;
        const double aqq = a(q, q) + t * apq;

        k.rot(a.data() + p * n, a.data() + q * n, n, c, s);
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          a(r, p) = a(p, r);
          a(r, q) = a(q, r);
        }
        a(p, p) = app;
        a(q, q) = aqq;
        a(p, q) = a(q, p) = 0.0;
        k.rot(vt.data() + p * n, vt.data() + q * n, n, c, s);
      }
    }
  }

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return finish(std::move(values), vt);
}

SpdMatrix::SpdMatrix(const Matrix& m) : SpdMatrix(SymmetricMatrix(m)) {}

SpdMatrix::SpdMatrix(const SymmetricMatrix& s) : m_(s.matrix()), eig_(sym_eig(s)) {
  require(eig_.values.back() > 0.0, ErrorKind::NotPositiveDefinite,
          "matrix is not positive definite (min eigenvalue " +
              std::to_string(eig_.values.back()) + ")");
}

SpdMatrix SpdMatrix::from_eigen(EigenDecomposition eig) {
  require(!eig.values.empty(), ErrorKind::InvalidInput, "empty decomposition");
  for (double v : eig.values)
    require(v > 0.0 && std::isfinite(v), ErrorKind::NotPositiveDefinite,
            "non-positive eigenvalue " + std::to_string(v));
  SpdMatrix out;
  out.m_ = eig.reconstruct();
  out.eig_ = std::move(eig);
  return out;
}

SpdMatrix SpdMatrix::trusted(Matrix m, EigenDecomposition eig) {
  require(m.rows() == eig.dim(), ErrorKind::ShapeError, "decomposition does not match matrix");
  require(eig.values.back() > 0.0, ErrorKind::NotPositiveDefinite,
          "matrix is not positive definite (min eigenvalue " + std::to_string(eig.values.back()) +
              ")");
  SpdMatrix out;
  out.m_ = std::move(m);
  out.eig_ = std::move(eig);
  return out;
}

SymmetricMatrix spd_log(const SpdMatrix& a) {
  return SymmetricMatrix::adopt(a.eigen().apply([](double x) { return std::log(x); }));
}

SpdMatrix spd_exp(const SymmetricMatrix& s) {
  EigenDecomposition eig = sym_eig(s);
  for (double& v : eig.values) v = std::exp(v);
  return SpdMatrix::from_eigen(std::move(eig));
}

double lem_distance_logs(const Matrix& log_a, const Matrix& log_b) {
  require(log_a.rows() == log_b.rows() && log_a.cols() == log_b.cols(), ErrorKind::ShapeError,
          "lem_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    const double d = log_a.data()[i] - log_b.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double lem_distance(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "lem_distance");
  return lem_distance_logs(spd_log(a).matrix(), spd_log(b).matrix());
}

Matrix mean_of_logs(std::span<const Matrix> logs) {
  require(!logs.empty(), ErrorKind::InvalidInput, "log-Euclidean mean of an empty list");
  const std::size_t n = logs.front().rows();
  std::vector<const Matrix*> order;
  order.reserve(logs.size());
  for (const auto& l : logs) {
    require(l.rows() == n && l.cols() == n, ErrorKind::ShapeError,
            "log-Euclidean mean: dimension mismatch");
    order.push_back(&l);
  }
  // Summing in a canonical order makes the result independent of the input
  // order down to the last bit.
  std::stable_sort(order.begin(), order.end(), [](const Matrix* x, const Matrix* y) {
    return std::lexicographical_compare(x->values().begin(), x->values().end(),
                                        y->values().begin(), y->values().end());
  });
  Matrix sum(n, n);
  for (const Matrix* l : order)
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += l->data()[i];
  sum *= 1.0 / static_cast<double>(logs.size());
  return sum;
}

SpdMatrix log_euclidean_mean(std::span<const SpdMatrix> ms) {
  require(!ms.empty(), ErrorKind::InvalidInput, "log-Euclidean mean of an empty list");
  std::vector<Matrix> logs;
  logs.reserve(ms.size());
  for (const auto& m : ms) {
    require_same_dim(m.dim(), ms.front().dim(), "log_euclidean_mean");
    logs.push_back(spd_log(m).matrix());
  }
  return spd_exp(SymmetricMatrix::adopt(mean_of_logs(logs)));
}

Matrix scm_raw(const Matrix& x, double eps) {
  require(x.cols() >= 2, ErrorKind::InvalidInput,
          "scm needs at least 2 time samples, got " + std::to_string(x.cols()));
  Matrix c = matmul_nt(x, x);
  c *= 1.0 / static_cast<double>(x.cols() - 1);
  for (std::size_t i = 0; i < c.rows(); ++i) c(i, i) += eps;
  return symmetrized(c);
}

SpdMatrix scm(const Matrix& x, double eps) {
  return SpdMatrix(trace_norm(scm_raw(x, eps), eps));
}

Matrix trace_norm(const Matrix& a, double eps) {
  const double t = trace(a);
  Matrix out = a * (1.0 / (t + eps));
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += eps;
  return out;
}

SpdMatrix batch_trace_norm(const SpdMatrix& a, double eps) {
  const double t = trace(a.matrix());
  // Eigenvectors are unchanged by a positive scaling plus a diagonal shift.
  EigenDecomposition eig = a.eigen();
  for (double& v : eig.values) v = v / (t + eps) + eps;
  return SpdMatrix::trusted(trace_norm(a.matrix(), eps), std::move(eig));
}

SpdMatrix riemannian_residual(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "riemannian_residual");
  Matrix sum = spd_log(a).matrix();
  sum += spd_log(b).matrix();
  return spd_exp(SymmetricMatrix::adopt(std::move(sum)));
}

double sim_from_distance(double d) { return 1.0 / (1.0 + std::log1p(d)); }

double manifold_sim(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "manifold_sim");
  return sim_from_distance(lem_distance(a, b));
}

Ellipsoid ellipsoid_axes(const SpdMatrix& a, std::size_t k) {
  require(k >= 1 && k <= a.dim(), ErrorKind::InvalidInput,
          "ellipsoid_axes: k=" + std::to_string(k) + " outside [1, " + std::to_string(a.dim()) +
              "]");
  const auto& eig = a.eigen();
  Ellipsoid e;
  e.top_k = k;
  e.axis_directions = Matrix(a.dim(), k);
  for (std::size_t i = 0; i < k; ++i) {
    e.eigenvalues.push_back(eig.values[i]);
    e.axis_lengths.push_back(2.0 / std::sqrt(eig.values[i]));
    for (std::size_t r = 0; r < a.dim(); ++r) e.axis_directions(r, i) = eig.vectors(r, i);
  }
  return e;
}

std::vector<double> tangent_features_of_log(const Matrix& log_a) {
  const std::size_t n = log_a.rows();
  std::vector<double> out;
  out.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      out.push_back(i == j ? log_a(i, j) : std::sqrt(2.0) * log_a(i, j));
  return out;
}

std::vector<double> tangent_features(const SpdMatrix& a) {
  return tangent_features_of_log(spd_log(a).matrix());
}

}  // namespace mendr
