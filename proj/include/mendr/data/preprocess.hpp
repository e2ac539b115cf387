#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "mendr/data/recording.hpp"

namespace mendr::data {

struct PreprocessConfig {
  double highpass = 0.1;
  double lowpass = 75.0;  // skipped when at or above the input Nyquist
  double notch = 60.0;
  double notch_q = 30.0;
  double harmonics_above = 240.0;  // notch harmonics only when fs exceeds this
  double target_rate = 128.0;
  double scale = 1e5;  // applied to values in volts
  double segment_seconds = 60.0;
  bool pretrain_trim = false;
  double min_seconds = 180.0;   // recordings this short or shorter are skipped
  double trim_seconds = 60.0;   // cut from each end
  double subject_cap_seconds = 3600.0;

  nlohmann::json to_json() const;
  static PreprocessConfig from_json(const nlohmann::json& j);
};

// Maps channel rows to the canonical order. Unknown names are ignored;
// returns the canonical matrix and presence mask. No canonical channel ->
// InvalidInput.
Matrix canonicalize(const RawRecording& rec, std::vector<double>& present);

// Filtering and notch at the native rate, in place on rows of x.
void filter_channels(Matrix& x, double fs, const PreprocessConfig& cfg);

Matrix resample_channels(const Matrix& x, double from, double to);

// Full chain for one recording. Segment ids are
// "<subject>_<recording index>_<segment index>". Short recordings in
// pretrain mode -> SkippedRecording.
std::vector<Segment> preprocess(const RawRecording& rec, const PreprocessConfig& cfg,
                                std::size_t recording_index = 0);

// Runs preprocess on each recording, logging and dropping skipped ones, and in
// pretrain mode keeps at most subject_cap_seconds of segments per subject.
std::vector<Segment> preprocess_many(const std::vector<RawRecording>& recs,
                                     const PreprocessConfig& cfg);

}  // namespace mendr::data
