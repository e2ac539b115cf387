#include "mendr/graph/electrodes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "mendr/error.hpp"
#include "mendr/io.hpp"
#include "mendr/log.hpp"

namespace mendr::graph {

namespace {

constexpr std::array<std::string_view, kNumChannels> kNames{
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz",
    "C4",  "T4",  "T5", "P3", "Pz", "P4", "T6", "O1", "O2"};

// Spherical (theta, phi) in degrees of the standard 10-20 positions in the
// BESA convention: theta is the signed angle from Cz (negative on the left),
// phi the azimuth from the right-ear axis towards the nose.
constexpr std::array<std::array<double, 2>, kNumChannels> kThetaPhi{{
    {-92, -72}, {92, 72},  {-92, -36}, {-60, -51}, {46, 90},   {60, 51},  {92, 36},
    {-92, 0},   {-46, 0},  {0, 0},     {46, 0},    {92, 0},    {-92, 36}, {-60, 51},
    {46, -90},  {60, -51}, {92, -36},  {-92, 72},  {92, -72},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Point3 normalized(Point3 p) {
  const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  require(n > 0.0 && std::isfinite(n), ErrorKind::InvalidInput, "electrode at the origin");
  return {p[0] / n, p[1] / n, p[2] / n};
}

}  // namespace

const std::array<std::string_view, kNumChannels>& canonical_names() { return kNames; }

std::optional<std::size_t> canonical_index(std::string_view name) {
  std::string n = lower(name);
  if (n == "t7") n = "t3";
  if (n == "t8") n = "t4";
  if (n == "p7") n = "t5";
  if (n == "p8") n = "t6";
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (lower(kNames[i]) == n) return i;
  return std::nullopt;
}

ElectrodeSet ElectrodeSet::standard() {
  ElectrodeSet es;
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    const double th = kThetaPhi[i][0] * std::numbers::pi / 180.0;
    const double ph = kThetaPhi[i][1] * std::numbers::pi / 180.0;
    es.names.emplace_back(kNames[i]);
    // x towards the right ear, y towards the nose, z up.
    es.coords.push_back(normalized({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                                    std::cos(th)}));
    es.present.push_back(1.0);
  }
  return es;
}

ElectrodeSet ElectrodeSet::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::InvalidInput, "montage must be a JSON object");
  ElectrodeSet es = standard();
  std::fill(es.present.begin(), es.present.end(), 0.0);
  for (const auto& [name, xyz] : j.items()) {
    auto idx = canonical_index(name);
    require(idx.has_value(), ErrorKind::InvalidInput,
            "montage electrode '" + name + "' is not one of the 19 canonical channels");
    require(xyz.is_array() && xyz.size() == 3, ErrorKind::InvalidInput,
            "montage electrode '" + name + "' needs [x, y, z]");
    es.coords[*idx] = normalized({xyz[0].get<double>(), xyz[1].get<double>(), xyz[2].get<double>()});
    es.present[*idx] = 1.0;
  }
  std::string missing;
  for (std::size_t i = 0; i < kNumChannels; ++i)
    if (es.present[i] == 0.0) missing += (missing.empty() ? "" : ",") + es.names[i];
  if (!missing.empty()) log().info("montage lacks {}; those channels stay masked", missing);
  return es;
}

ElectrodeSet ElectrodeSet::from_file(const std::filesystem::path& p) {
  return from_json(io::read_json(p));
}

double geodesic_distance(const Point3& p, const Point3& q, double r) {
  const double np = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  const double nq = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  require(std::abs(np - r) <= 1e-6 && std::abs(nq - r) <= 1e-6, ErrorKind::InvalidInput,
          "geodesic_distance: points are not on the sphere of radius " + std::to_string(r));
  const double c = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (r * r);
  return r * std::acos(std::clamp(c, -1.0, 1.0));
}

GeodesicGraph build_graph(const ElectrodeSet& es, bool normalize) {
  const std::size_t n = es.coords.size();
  GeodesicGraph g;
  g.dist = Matrix(n, n);
  g.normalized = normalize;
  double mx = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = geodesic_distance(es.coords[i], es.coords[j]);
      g.dist(i, j) = g.dist(j, i) = d;
      mx = std::max(mx, d);
    }
  if (normalize && mx > 0.0) g.dist *= 1.0 / mx;
  return g;
}

const GeodesicGraph& standard_graph() {
  static const GeodesicGraph g = build_graph(ElectrodeSet::standard(), true);
  return g;
}

std::vector<double> sample_channel_mask(std::size_t channels, double p_drop, Rng& rng,
                                        const std::vector<double>* base_mask) {
  require(p_drop >= 0.0 && p_drop < 1.0, ErrorKind::InvalidInput,
          "channel dropout probability must be in [0, 1), got " + std::to_string(p_drop));
  require(!base_mask || base_mask->size() == channels, ErrorKind::ShapeError,
          "base mask length");
  std::vector<double> mask(channels);
  for (;;) {
    std::size_t kept = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const bool available = !base_mask || (*base_mask)[c] > 0.0;
      const bool drop = rng.bernoulli(p_drop);
      mask[c] = available && !drop ? 1.0 : 0.0;
      kept += mask[c] > 0.0;
    }
    if (kept > 0) return mask;
  }
}

DropoutResult channel_dropout(const wavelet::BandDecomposition& bands, double p_drop, Rng& rng,
                              const std::vector<double>* base_mask) {
  DropoutResult out;
  out.mask = sample_channel_mask(bands.n_channels(), p_drop, rng, base_mask);
  out.bands = bands;
  for (auto& [b, m] : out.bands.bands)
    for (std::size_t c = 0; c < m.rows(); ++c)
      if (out.mask[c] == 0.0)
        for (std::size_t t = 0; t < m.cols(); ++t) m(c, t) = 0.0;
  return out;
}

}  // namespace mendr::graph
