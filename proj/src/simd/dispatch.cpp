#include <cstdlib>
#include <string>

#include "mendr/error.hpp"
#include "mendr/simd/kernels.hpp"

namespace mendr::simd {
namespace {

const KernelTable* pick_default() {
  const char* env = std::getenv("MENDR_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &scalar_kernels();
  if (cpu_supports(Isa::avx2)) return avx2_kernels();
  return &scalar_kernels();
}

const KernelTable*& current() {
  static const KernelTable* table = pick_default();
  return table;
}

}  // namespace

bool cpu_supports(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() noexcept { return *current(); }

void set_active(Isa isa) {
  require(cpu_supports(isa), ErrorKind::InvalidInput,
          "CPU does not support " + std::string(to_string(isa)));
  current() = isa == Isa::scalar ? &scalar_kernels() : avx2_kernels();
}

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::scalar ? "scalar" : "avx2";
}

}  // namespace mendr::simd
