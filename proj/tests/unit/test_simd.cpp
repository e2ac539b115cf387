#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mendr/simd/kernels.hpp"

using namespace mendr;

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!simd::cpu_supports(simd::Isa::avx2)) return;
  const auto& s = simd::scalar_kernels();
  const auto& v = *simd::avx2_kernels();
  Rng rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 19u, 64u, 257u}) {
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) < 1e-12 * (n + 1));

    auto y1 = b, y2 = b;
    s.axpy(0.3, a.data(), y1.data(), n);
    v.axpy(0.3, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-14);

    auto x1 = a, x2 = a, z1 = b, z2 = b;
    s.rot(x1.data(), z1.data(), n, 0.6, 0.8);
    v.rot(x2.data(), z2.data(), n, 0.6, 0.8);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(x1[i] - x2[i]) < 1e-14);
      CHECK(std::abs(z1[i] - z2[i]) < 1e-14);
    }
  }
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {19, 19, 19}, {8, 33, 6}, {2, 4, 128}}) {
    Matrix a = testing::random_matrix(m, k, rng);
    Matrix b = testing::random_matrix(k, n, rng);
    Matrix bt = testing::random_matrix(n, k, rng);
    Matrix c1(m, n), c2(m, n), d1(m, n), d2(m, n);
    s.gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
    v.gemm_nn(a.data(), b.data(), c2.data(), m, k, n);
    s.gemm_nt(a.data(), bt.data(), d1.data(), m, k, n);
    v.gemm_nt(a.data(), bt.data(), d2.data(), m, k, n);
    CHECK(max_abs(c1 - c2) < 1e-12);
    CHECK(max_abs(d1 - d2) < 1e-12);
  }
}

TEST_CASE("eigendecomposition matches across kernel tables") {
  if (!simd::cpu_supports(simd::Isa::avx2)) return;
  Rng rng(11);
  Matrix a = testing::random_symmetric(19, rng);
  simd::set_active(simd::Isa::scalar);
  auto e1 = sym_eig(SymmetricMatrix(a));
  simd::set_active(simd::Isa::avx2);
  auto e2 = sym_eig(SymmetricMatrix(a));
  for (std::size_t i = 0; i < 19; ++i) CHECK(std::abs(e1.values[i] - e2.values[i]) < 1e-12);
  CHECK(max_abs(e1.vectors - e2.vectors) < 1e-9);
}

TEST_CASE("pinning an isa") {
  simd::set_active(simd::Isa::scalar);
  CHECK(simd::active().isa == simd::Isa::scalar);
  if (simd::cpu_supports(simd::Isa::avx2)) {
    simd::set_active(simd::Isa::avx2);
    CHECK(simd::active().isa == simd::Isa::avx2);
  }
}
