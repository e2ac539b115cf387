#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mendr {

struct GradcheckOptions {
  std::size_t cases = 50;
  double h = 1e-5;
  double tol = 1e-4;
  double min_gap = 1e-3;  // eigengap of the random spectra
  std::uint64_t seed = 0;
  bool negate_coupling = false;  // negative control: flips the sign of F in eig_backward
};

struct GradcheckResult {
  std::string suite;
  std::string check;
  std::size_t cases = 0;
  std::size_t failed = 0;
  double max_rel_error = 0;  // 0 for finiteness-only checks
  bool finite = true;

  bool passed() const noexcept { return failed == 0 && finite; }
};

// Central finite-difference suites: "spd", "stiefel", "cholesky", "losses" or
// "all". Unknown names -> InvalidInput.
std::vector<GradcheckResult> run_gradcheck(std::string_view module, const GradcheckOptions& opt = {});

bool all_passed(const std::vector<GradcheckResult>& results);

}  // namespace mendr
