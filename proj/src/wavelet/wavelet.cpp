#include "mendr/wavelet/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "mendr/error.hpp"
#include "mendr/io.hpp"
#include "mendr/log.hpp"

namespace mendr::wavelet {

namespace {

constexpr std::size_t kTaps = 8;
constexpr int kLevels = 5;

FilterPair make_db4() {
  FilterPair f;
  f.lowpass = {0.23037781330889650,  0.71484657055291565, 0.63088076792985891,
               -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
               0.032883011666885200, -0.010597401785069032};
  for (std::size_t k = 0; k < kTaps; ++k)
    f.highpass[k] = (k % 2 == 0 ? 1.0 : -1.0) * f.lowpass[kTaps - 1 - k];
  return f;
}

// Detail band produced at each analysis level, finest first.
constexpr std::array<Band, kLevels> kDetailAtLevel{Band::high, Band::gamma, Band::beta,
                                                   Band::alpha, Band::theta};

}  // namespace

const FilterPair& db4() {
  static const FilterPair f = make_db4();
  return f;
}

void dwt_step(std::span<const double> x, std::span<double> approx, std::span<double> detail,
              const FilterPair& f) {
  const std::size_t n = x.size();
  require(n % 2 == 0, ErrorKind::InvalidInput, "dwt_step: odd length " + std::to_string(n));
  require(n >= kTaps, ErrorKind::InvalidInput, "dwt_step: length below filter length");
  require(approx.size() == n / 2 && detail.size() == n / 2, ErrorKind::ShapeError,
          "dwt_step: output size");
  for (std::size_t k = 0; k < n / 2; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t t = 0; t < kTaps; ++t) {
      const double v = x[(2 * k + t) % n];
      a += f.lowpass[t] * v;
      d += f.highpass[t] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

std::pair<std::vector<double>, std::vector<double>> dwt_step(std::span<const double> x,
                                                             const FilterPair& f) {
  std::vector<double> a(x.size() / 2), d(x.size() / 2);
  dwt_step(x, a, d, f);
  return {std::move(a), std::move(d)};
}

void idwt_step(std::span<const double> approx, std::span<const double> detail, std::span<double> x,
               const FilterPair& f) {
  require(approx.size() == detail.size(), ErrorKind::ShapeError,
          "idwt_step: approx/detail length mismatch");
  const std::size_t half = approx.size();
  const std::size_t n = 2 * half;
  require(x.size() == n, ErrorKind::ShapeError, "idwt_step: output size");
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t k = 0; k < half; ++k)
    for (std::size_t t = 0; t < kTaps; ++t)
      x[(2 * k + t) % n] += f.lowpass[t] * approx[k] + f.highpass[t] * detail[k];
}

std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                              const FilterPair& f) {
  std::vector<double> x(2 * approx.size());
  idwt_step(approx, detail, x, f);
  return x;
}

std::string_view name(Band b) noexcept {
  switch (b) {
    case Band::delta: return "delta";
    case Band::theta: return "theta";
    case Band::alpha: return "alpha";
    case Band::beta: return "beta";
    case Band::gamma: return "gamma";
    case Band::high: return "high";
  }
  return "?";
}

Band band_from_name(std::string_view s) {
  for (Band b : kAllBands)
    if (name(b) == s) return b;
  fail(ErrorKind::InvalidInput, "unknown band '" + std::string(s) + "'");
}

std::string_view path(Band b) noexcept {
  switch (b) {
    case Band::delta: return "AAAAA";
    case Band::theta: return "AAAAD";
    case Band::alpha: return "AAAD";
    case Band::beta: return "AAD";
    case Band::gamma: return "AD";
    case Band::high: return "D";
  }
  return "";
}

std::size_t patch_length(Band b) noexcept { return kPatchSamples >> path(b).size(); }

std::pair<double, double> passband(Band b) noexcept {
  const double nyquist = kSampleRate / 2.0;
  const std::size_t level = path(b).size();
  const double width = nyquist / static_cast<double>(1u << level);
  return b == Band::delta ? std::pair{0.0, width} : std::pair{width, 2.0 * width};
}

std::vector<Band> bands_for(bool include_high) {
  std::vector<Band> out(kLowBands.begin(), kLowBands.end());
  if (include_high) out.push_back(Band::high);
  return out;
}

std::size_t BandDecomposition::n_channels() const {
  return bands.empty() ? 0 : bands.begin()->second.rows();
}

const Matrix& BandDecomposition::at(Band b) const {
  auto it = bands.find(b);
  require(it != bands.end(), ErrorKind::IncompleteDecomposition,
          "band " + std::string(name(b)) + " missing from decomposition");
  return it->second;
}

Matrix& BandDecomposition::at(Band b) {
  auto it = bands.find(b);
  require(it != bands.end(), ErrorKind::IncompleteDecomposition,
          "band " + std::string(name(b)) + " missing from decomposition");
  return it->second;
}

BandDecomposition packet_decompose(const Matrix& x, bool include_high) {
  require(x.cols() > 0 && x.cols() % kPatchSamples == 0, ErrorKind::ShapeError,
          "packet_decompose: expected a multiple of 256 samples, got " + std::to_string(x.cols()));
  const std::size_t n_patches = x.cols() / kPatchSamples;
  const std::size_t channels = x.rows();

  BandDecomposition bd;
  bd.n_patches = n_patches;
  for (Band b : bands_for(include_high)) bd.bands[b] = Matrix(channels, n_patches * patch_length(b));

  std::vector<double> buf(kPatchSamples), approx(kPatchSamples / 2), detail(kPatchSamples / 2);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < n_patches; ++p) {
      std::copy_n(x.data() + c * x.cols() + p * kPatchSamples, kPatchSamples, buf.begin());
      std::size_t len = kPatchSamples;
      for (int level = 0; level < kLevels; ++level) {
        const std::size_t half = len / 2;
        dwt_step(std::span(buf.data(), len), std::span(approx.data(), half),
                 std::span(detail.data(), half));
        const Band band = kDetailAtLevel[level];
        if (bd.has(band)) std::copy_n(detail.begin(), half, bd.at(band).ptr(c, p * half));
        std::copy_n(approx.begin(), half, buf.begin());
        len = half;
      }
      std::copy_n(buf.begin(), len, bd.at(Band::delta).ptr(c, p * len));
    }
  }
  return bd;
}

namespace {

Matrix reconstruct_impl(const BandDecomposition& bd, bool allow_missing) {
  if (!allow_missing)
    for (Band b : kAllBands) bd.at(b);
  const Matrix& delta = bd.at(Band::delta);
  const std::size_t channels = delta.rows();
  const std::size_t n_patches = bd.n_patches;
  for (const auto& [b, m] : bd.bands)
    require(m.rows() == channels && m.cols() == n_patches * patch_length(b), ErrorKind::ShapeError,
            "band " + std::string(name(b)) + " has inconsistent shape");

  Matrix out(channels, n_patches * kPatchSamples);
  std::vector<double> cur(kPatchSamples), next(kPatchSamples), zeros(kPatchSamples, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < n_patches; ++p) {
      std::size_t len = patch_length(Band::delta);
      std::copy_n(delta.ptr(c, p * len), len, cur.begin());
      for (int level = kLevels - 1; level >= 0; --level) {
        const Band band = kDetailAtLevel[level];
        const double* d = bd.has(band) ? bd.at(band).ptr(c, p * len) : zeros.data();
        idwt_step(std::span<const double>(cur.data(), len), std::span<const double>(d, len),
                  std::span(next.data(), 2 * len));
        len *= 2;
        std::swap(cur, next);
      }
      std::copy_n(cur.begin(), kPatchSamples, out.ptr(c, p * kPatchSamples));
    }
  }
  return out;
}

}  // namespace

Matrix packet_reconstruct(const BandDecomposition& bd) { return reconstruct_impl(bd, false); }

Matrix packet_reconstruct_partial(const BandDecomposition& bd) {
  return reconstruct_impl(bd, true);
}

Matrix trim_to_patches(const Matrix& recording) {
  const std::size_t n = recording.cols();
  require(n >= kPatchSamples, ErrorKind::InvalidInput,
          "recording has " + std::to_string(n) + " samples, fewer than one 256-sample patch");
  const std::size_t keep = n / kPatchSamples * kPatchSamples;
  if (keep != n) log().warn("dropping {} trailing samples that do not fill a patch", n - keep);
  if (keep == n) return recording;
  Matrix out(recording.rows(), keep);
  for (std::size_t r = 0; r < recording.rows(); ++r)
    std::copy_n(recording.data() + r * n, keep, out.data() + r * keep);
  return out;
}

std::vector<Matrix> patchify(const Matrix& recording) {
  const Matrix trimmed = trim_to_patches(recording);
  const std::size_t n_patches = trimmed.cols() / kPatchSamples;
  std::vector<Matrix> out;
  out.reserve(n_patches);
  for (std::size_t p = 0; p < n_patches; ++p) {
    Matrix patch(trimmed.rows(), kPatchSamples);
    for (std::size_t r = 0; r < trimmed.rows(); ++r)
      std::copy_n(trimmed.ptr(r, p * kPatchSamples), kPatchSamples, patch.ptr(r, 0));
    out.push_back(std::move(patch));
  }
  return out;
}

std::map<Band, double> band_energies(const BandDecomposition& bd) {
  std::map<Band, double> e;
  for (const auto& [b, m] : bd.bands) e[b] = inner(m, m);
  return e;
}

void write_decomposition(const BandDecomposition& bd, const std::filesystem::path& dir) {
  io::ensure_dir(dir);
  io::json manifest;
  manifest["schema"] = 1;
  manifest["n_patches"] = bd.n_patches;
  manifest["patch_samples"] = bd.patch_samples;
  manifest["channels"] = bd.channels;
  manifest["n_channels"] = bd.n_channels();
  io::json bands = io::json::array();
  for (const auto& [b, m] : bd.bands) {
    bands.push_back({{"name", name(b)},
                     {"path", path(b)},
                     {"patch_length", patch_length(b)},
                     {"file", std::string(name(b)) + ".f64"}});
    io::write_f64(dir / (std::string(name(b)) + ".f64"), m.values());
  }
  manifest["bands"] = bands;
  io::write_json(dir / "manifest.json", manifest);
}

BandDecomposition read_decomposition(const std::filesystem::path& dir) {
  const io::json manifest = io::read_json(dir / "manifest.json");
  BandDecomposition bd;
  try {
    bd.n_patches = manifest.at("n_patches").get<std::size_t>();
    bd.patch_samples = manifest.at("patch_samples").get<std::size_t>();
    bd.channels = manifest.at("channels").get<std::vector<std::string>>();
    const auto rows = manifest.at("n_channels").get<std::size_t>();
    for (const auto& entry : manifest.at("bands")) {
      const Band b = band_from_name(entry.at("name").get<std::string>());
      const auto len = entry.at("patch_length").get<std::size_t>();
      require(len == patch_length(b), ErrorKind::CorruptDataset,
              "band " + std::string(name(b)) + " has unexpected length");
      std::vector<double> data = io::read_f64(dir / entry.at("file").get<std::string>());
      require(data.size() == rows * bd.n_patches * len, ErrorKind::CorruptDataset,
              "band file size does not match manifest for " + std::string(name(b)));
      Matrix m(rows, bd.n_patches * len);
      std::copy(data.begin(), data.end(), m.data());
      bd.bands[b] = std::move(m);
    }
  } catch (const io::json::exception& e) {
    fail(ErrorKind::CorruptDataset, (dir / "manifest.json").string() + ": " + e.what());
  }
  return bd;
}

}  // namespace mendr::wavelet
