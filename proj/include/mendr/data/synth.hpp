#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mendr/data/recording.hpp"
#include "mendr/rng.hpp"
#include "mendr/wavelet/wavelet.hpp"

namespace mendr::data {

// Generator for desk-scale experiments. Each subject has a few dipole-like
// sources on the upper hemisphere; every band is a sinusoid near the centre
// of its wavelet node, carried by all sources with an activity level drawn
// per 2 s window and shared across bands. Pink noise and a per-subject
// spectral tilt are added per channel. Values are microvolts.
struct SyntheticSpec {
  std::map<wavelet::Band, double> amplitudes;  // microvolts
  double noise = 0.3;                          // pink noise std, microvolts
  double tilt_sd = 0.1;
  std::size_t n_subjects = 2;
  std::size_t n_segments = 4;  // per subject
  double segment_seconds = 60.0;
  double margin_seconds = 0.0;  // extra signal at each end
  double sample_rate = 128.0;
  std::size_t n_sources = 8;
  double source_spread = 0.4;   // radians
  double activity_sd = 1.0;     // lognormal sigma
  double freq_jitter = 0.1;     // relative
  int label = -1;
  std::string subject_prefix = "s";
};

// Band centre frequencies used by the generator (Hz).
double band_frequency(wavelet::Band b);

// "mixed", "alpha", "beta" or "zero".
std::map<wavelet::Band, double> profile(const std::string& name);

struct SyntheticRecording {
  RawRecording recording;
  std::map<wavelet::Band, double> band_energy;  // mean power per channel
};

std::vector<SyntheticRecording> synth_eeg(const SyntheticSpec& spec, Rng& rng);

// Two labeled classes with n_subjects each. "disjoint": alpha vs beta
// profiles; "identical": both mixed.
std::vector<SyntheticRecording> synth_labeled(const SyntheticSpec& base, const std::string& kind,
                                              Rng& rng);

std::vector<RawRecording> recordings(const std::vector<SyntheticRecording>& s);

}  // namespace mendr::data
