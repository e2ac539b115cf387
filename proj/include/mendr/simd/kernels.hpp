#pragma once

// Dense double-precision inner loops used by the linear algebra, the Jacobi
// eigensolver and the convolution layers. Each kernel has a scalar reference
// and an AVX2+FMA variant; the variant is chosen once at startup from CPUID
// and can be pinned with MENDR_SIMD=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace mendr::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Givens rotation: x' = c x - s y, y' = s x + c y
  void (*rot)(double* x, double* y, std::size_t n, double c, double s);
  // C(m x n) += A(m x k) * B(k x n), all row-major and densely packed.
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  // C(m x n) += A(m x k) * B(n x k)^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_kernels() noexcept;

bool cpu_supports(Isa isa) noexcept;

// The table used by the rest of the library.
const KernelTable& active() noexcept;

// Pins the active table. Throws InvalidInput when the CPU lacks the ISA.
void set_active(Isa isa);

std::string_view to_string(Isa isa) noexcept;

}  // namespace mendr::simd
