#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mendr/linalg/matrix.hpp"

namespace mendr::wavelet {

inline constexpr std::size_t kPatchSamples = 256;  // 2 s at 128 Hz
inline constexpr double kSampleRate = 128.0;

struct FilterPair {
  std::array<double, 8> lowpass;
  std::array<double, 8> highpass;  // highpass[k] = (-1)^k lowpass[7 - k]
};

// Daubechies 4 (8 taps).
const FilterPair& db4();

// One analysis level with periodized boundaries:
// a[k] = sum_n h[n] x[(2k + n) mod N], d[k] = sum_n g[n] x[(2k + n) mod N].
void dwt_step(std::span<const double> x, std::span<double> approx, std::span<double> detail,
              const FilterPair& f = db4());
std::pair<std::vector<double>, std::vector<double>> dwt_step(std::span<const double> x,
                                                             const FilterPair& f = db4());

// Exact inverse of dwt_step (the filter bank is orthonormal).
void idwt_step(std::span<const double> approx, std::span<const double> detail, std::span<double> x,
               const FilterPair& f = db4());
std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                              const FilterPair& f = db4());

enum class Band { delta, theta, alpha, beta, gamma, high };

inline constexpr std::array<Band, 6> kAllBands{Band::delta, Band::theta, Band::alpha,
                                               Band::beta,  Band::gamma, Band::high};
inline constexpr std::array<Band, 5> kLowBands{Band::delta, Band::theta, Band::alpha, Band::beta,
                                               Band::gamma};

std::string_view name(Band b) noexcept;
Band band_from_name(std::string_view s);
// Tree path, e.g. "AAAD" for alpha.
std::string_view path(Band b) noexcept;
// Coefficients per 256-sample patch: 8, 8, 16, 32, 64, 128.
std::size_t patch_length(Band b) noexcept;
// Passband of the node for a 128 Hz signal, in Hz.
std::pair<double, double> passband(Band b) noexcept;

std::vector<Band> bands_for(bool include_high);

// Per-band coefficients for a run of consecutive patches. Each band matrix
// is channels x (n_patches * patch_length(band)), patch-major along columns.
struct BandDecomposition {
  std::map<Band, Matrix> bands;
  std::size_t n_patches = 0;
  std::size_t patch_samples = kPatchSamples;
  std::vector<std::string> channels;

  std::size_t n_channels() const;
  bool has(Band b) const { return bands.count(b) != 0; }
  const Matrix& at(Band b) const;
  Matrix& at(Band b);
};

// Decomposes every 256-sample patch of x (channels x (n * 256)).
BandDecomposition packet_decompose(const Matrix& x, bool include_high);

// Inverse. Throws IncompleteDecomposition when a band is missing.
Matrix packet_reconstruct(const BandDecomposition& bd);

// Inverse with any missing band treated as zero.
Matrix packet_reconstruct_partial(const BandDecomposition& bd);

// Splits a recording into non-overlapping 256-sample patches, dropping the
// tail. Warns through the logger when samples are dropped.
std::vector<Matrix> patchify(const Matrix& recording);
// Keeps the first floor(N / 256) * 256 samples.
Matrix trim_to_patches(const Matrix& recording);

// Sum of squared coefficients per band.
std::map<Band, double> band_energies(const BandDecomposition& bd);

// Directory with manifest.json and one <band>.f64 file per band.
void write_decomposition(const BandDecomposition& bd, const std::filesystem::path& dir);
BandDecomposition read_decomposition(const std::filesystem::path& dir);

}  // namespace mendr::wavelet
