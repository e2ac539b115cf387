#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mendr/linalg/matrix.hpp"
#include "mendr/rng.hpp"
#include "mendr/wavelet/wavelet.hpp"

namespace mendr::graph {

inline constexpr std::size_t kNumChannels = 19;

using Point3 = std::array<double, 3>;

// Fp1, Fp2, F7, F3, Fz, F4, F8, T3, C3, Cz, C4, T4, T5, P3, Pz, P4, T6, O1, O2
const std::array<std::string_view, kNumChannels>& canonical_names();

// Index in the canonical order; accepts the 10-10 aliases T7/T8/P7/P8 and is
// case-insensitive.
std::optional<std::size_t> canonical_index(std::string_view name);

struct ElectrodeSet {
  std::vector<std::string> names;  // canonical order
  std::vector<Point3> coords;      // unit sphere
  std::vector<double> present;     // 1 when the montage has the electrode

  static ElectrodeSet standard();
  // {name: [x, y, z], ...}; coordinates are projected to the unit sphere and
  // canonical electrodes absent from the file are marked missing.
  static ElectrodeSet from_json(const nlohmann::json& j);
  static ElectrodeSet from_file(const std::filesystem::path& p);
};

// arccos(<p, q> / r^2) with the cosine clamped to [-1, 1].
double geodesic_distance(const Point3& p, const Point3& q, double r = 1.0);

struct GeodesicGraph {
  Matrix dist;
  bool normalized = false;
};

GeodesicGraph build_graph(const ElectrodeSet& es, bool normalize);
// Normalized graph of the standard montage.
const GeodesicGraph& standard_graph();

struct DropoutResult {
  wavelet::BandDecomposition bands;
  std::vector<double> mask;  // 1 kept, 0 dropped
};

// Zeroes each channel of every band with probability p_drop, shared across
// bands and patches of the segment. Channels already absent in base_mask stay
// absent. At least one channel is always kept.
DropoutResult channel_dropout(const wavelet::BandDecomposition& bands, double p_drop, Rng& rng,
                              const std::vector<double>* base_mask = nullptr);

// Mask alone; same sampling as channel_dropout.
std::vector<double> sample_channel_mask(std::size_t channels, double p_drop, Rng& rng,
                                        const std::vector<double>* base_mask = nullptr);

}  // namespace mendr::graph
