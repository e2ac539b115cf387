#include "mendr/data/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"

namespace mendr::data {

using wavelet::Band;

double band_frequency(Band b) {
  switch (b) {
    case Band::delta: return 1.0;
    case Band::theta: return 3.0;
    case Band::alpha: return 6.0;
    case Band::beta: return 12.0;
    case Band::gamma: return 24.0;
    case Band::high: return 48.0;
  }
  return 0.0;
}

std::map<Band, double> profile(const std::string& name) {
  if (name == "mixed")
    return {{Band::delta, 10}, {Band::theta, 8}, {Band::alpha, 12}, {Band::beta, 6}, {Band::gamma, 3}};
  if (name == "alpha") return {{Band::alpha, 20}};
  if (name == "beta") return {{Band::beta, 20}};
  if (name == "zero") return {};
  fail(ErrorKind::InvalidInput, "unknown synthetic profile: " + name);
}

namespace {

// Paul Kellet's refined pink-noise filter, normalized to unit std.
std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  double b[7] = {};
  std::vector<double> out(n);
  const std::size_t burn = 4096;
  for (std::size_t i = 0; i < n + burn; ++i) {
    const double w = rng.normal();
    b[0] = 0.99886 * b[0] + w * 0.0555179;
    b[1] = 0.99332 * b[1] + w * 0.0750759;
    b[2] = 0.96900 * b[2] + w * 0.1538520;
    b[3] = 0.86650 * b[3] + w * 0.3104856;
    b[4] = 0.55000 * b[4] + w * 0.5329522;
    b[5] = -0.7616 * b[5] - w * 0.0168980;
    const double pink = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
    b[6] = w * 0.115926;
    if (i >= burn) out[i - burn] = pink;
  }
  double mean = 0, sq = 0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : out) {
    v -= mean;
    sq += v * v;
  }
  const double sd = std::sqrt(sq / static_cast<double>(n));
  if (sd > 0)
    for (double& v : out) v /= sd;
  return out;
}

SyntheticRecording synth_subject(const SyntheticSpec& spec, const std::string& subject, Rng rng) {
  for (const auto& [b, a] : spec.amplitudes)
    require(a >= 0, ErrorKind::InvalidInput, "band amplitudes must be non-negative");
  const std::size_t nc = graph::kNumChannels;
  const double fs = spec.sample_rate;
  const auto n = static_cast<std::size_t>(
      std::llround((spec.n_segments * spec.segment_seconds + 2 * spec.margin_seconds) * fs));
  const auto es = graph::ElectrodeSet::standard();

  const std::size_t k_src = std::max<std::size_t>(1, spec.n_sources);
  Matrix mix(nc, k_src);
  for (std::size_t k = 0; k < k_src; ++k) {
    const double z = rng.uniform(0.2, 1.0), phi = rng.uniform(0, 2 * std::numbers::pi);
    const double r = std::sqrt(1 - z * z);
    const graph::Point3 p{r * std::cos(phi), r * std::sin(phi), z};
    for (std::size_t c = 0; c < nc; ++c) {
      const double d = graph::geodesic_distance(es.coords[c], p);
      mix(c, k) = std::exp(-d * d / (2 * spec.source_spread * spec.source_spread));
    }
  }
  double norm = 0;
  for (double v : mix.values()) norm += v * v;
  mix *= 1.0 / std::sqrt(norm / static_cast<double>(nc));

  const double tilt = rng.normal(0, spec.tilt_sd);
  const auto window = static_cast<std::size_t>(std::llround(2 * fs));
  const std::size_t n_win = (n + window - 1) / window;
  Matrix activity(k_src, n_win);
  const double s = spec.activity_sd;
  for (double& v : activity.values()) v = std::exp(s * rng.normal() - s * s);

  SyntheticRecording out;
  RawRecording& rec = out.recording;
  rec.sample_rate = fs;
  rec.subject_id = subject;
  rec.label = spec.label;
  rec.channels.assign(graph::canonical_names().begin(), graph::canonical_names().end());
  rec.data = Matrix(nc, n);

  Matrix src(k_src, n);
  for (Band b : wavelet::kAllBands) {
    const auto it = spec.amplitudes.find(b);
    const double f0 = band_frequency(b);
    // Draw per band even when silent so enabling one band does not reshuffle others.
    std::vector<double> freq(k_src), phase(k_src);
    for (std::size_t k = 0; k < k_src; ++k) {
      freq[k] = f0 * (1 + spec.freq_jitter * rng.uniform(-1, 1));
      phase[k] = rng.uniform(0, 2 * std::numbers::pi);
    }
    if (it == spec.amplitudes.end() || it->second == 0.0) {
      out.band_energy[b] = 0.0;
      continue;
    }
    const double amp = it->second * std::pow(f0 / 10.0, tilt);
    for (std::size_t k = 0; k < k_src; ++k) {
      const double w = 2 * std::numbers::pi * freq[k] / fs;
      for (std::size_t t = 0; t < n; ++t)
        src(k, t) = amp * activity(k, t / window) * std::sin(w * static_cast<double>(t) + phase[k]);
    }
    const Matrix comp = matmul(mix, src);
    double e = 0;
    for (double v : comp.values()) e += v * v;
    out.band_energy[b] = e / static_cast<double>(comp.size());
    rec.data += comp;
  }
  if (spec.noise > 0)
    for (std::size_t c = 0; c < nc; ++c) {
      const auto pn = pink_noise(n, rng);
      for (std::size_t t = 0; t < n; ++t) rec.data(c, t) += spec.noise * pn[t];
    }
  return out;
}

}  // namespace

std::vector<SyntheticRecording> synth_eeg(const SyntheticSpec& spec, Rng& rng) {
  require(spec.sample_rate > 0 && spec.segment_seconds > 0, ErrorKind::InvalidInput,
          "synthetic spec needs positive rate and segment length");
  std::vector<SyntheticRecording> out;
  for (std::size_t i = 0; i < spec.n_subjects; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    const std::string subject = spec.subject_prefix + buf;
    out.push_back(synth_subject(spec, subject, rng.fork(subject)));
  }
  return out;
}

std::vector<SyntheticRecording> synth_labeled(const SyntheticSpec& base, const std::string& kind,
                                              Rng& rng) {
  require(kind == "disjoint" || kind == "identical", ErrorKind::InvalidInput,
          "labeled kind must be disjoint or identical");
  std::vector<SyntheticRecording> out;
  for (int label = 0; label < 2; ++label) {
    SyntheticSpec s = base;
    s.label = label;
    s.subject_prefix = "c" + std::to_string(label) + "s";
    s.amplitudes = kind == "identical" ? profile("mixed") : profile(label == 0 ? "alpha" : "beta");
    Rng r = rng.fork("class" + std::to_string(label));
    auto part = synth_eeg(s, r);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

std::vector<RawRecording> recordings(const std::vector<SyntheticRecording>& s) {
  std::vector<RawRecording> out;
  out.reserve(s.size());
  for (const auto& r : s) out.push_back(r.recording);
  return out;
}

}  // namespace mendr::data
