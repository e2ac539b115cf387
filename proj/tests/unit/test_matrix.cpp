#include "doctest.h"
#include "helpers.hpp"
#include "mendr/error.hpp"

using namespace mendr;

namespace {

Matrix naive_mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

}  // namespace

TEST_CASE("products against triple loop") {
  Rng rng(3);
  Matrix a = testing::random_matrix(5, 7, rng);
  Matrix b = testing::random_matrix(7, 4, rng);
  Matrix c = testing::random_matrix(4, 7, rng);
  Matrix d = testing::random_matrix(5, 3, rng);
  CHECK(max_abs(matmul(a, b) - naive_mul(a, b)) < 1e-12);
  CHECK(max_abs(matmul_nt(a, c) - naive_mul(a, c.transposed())) < 1e-12);
  CHECK(max_abs(matmul_tn(a, d) - naive_mul(a.transposed(), d)) < 1e-12);
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("determinant") {
  CHECK(determinant(Matrix{{2, 0}, {0, 3}}) == doctest::Approx(6));
  CHECK(determinant(Matrix{{0, 1}, {1, 0}}) == doctest::Approx(-1));
  CHECK(determinant(Matrix{{1, 2}, {2, 4}}) == doctest::Approx(0));
}

TEST_CASE("ragged literal is rejected") {
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), Error);
}
