#include "mendr/data/preprocess.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "mendr/data/filters.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/log.hpp"
#include "mendr/wavelet/wavelet.hpp"

namespace mendr::data {

using nlohmann::json;

json PreprocessConfig::to_json() const {
  return {{"highpass", highpass},
          {"lowpass", lowpass},
          {"notch", notch},
          {"notch_q", notch_q},
          {"harmonics_above", harmonics_above},
          {"target_rate", target_rate},
          {"scale", scale},
          {"segment_seconds", segment_seconds},
          {"pretrain_trim", pretrain_trim},
          {"min_seconds", min_seconds},
          {"trim_seconds", trim_seconds},
          {"subject_cap_seconds", subject_cap_seconds}};
}

PreprocessConfig PreprocessConfig::from_json(const json& j) {
  require(j.is_object(), ErrorKind::ConfigError, "preprocess config must be an object");
  PreprocessConfig c;
  const std::map<std::string, double*> nums{{"highpass", &c.highpass},
                                            {"lowpass", &c.lowpass},
                                            {"notch", &c.notch},
                                            {"notch_q", &c.notch_q},
                                            {"harmonics_above", &c.harmonics_above},
                                            {"target_rate", &c.target_rate},
                                            {"scale", &c.scale},
                                            {"segment_seconds", &c.segment_seconds},
                                            {"min_seconds", &c.min_seconds},
                                            {"trim_seconds", &c.trim_seconds},
                                            {"subject_cap_seconds", &c.subject_cap_seconds}};
  for (const auto& [k, v] : j.items()) {
    if (k == "pretrain_trim") {
      require(v.is_boolean(), ErrorKind::ConfigError, "pretrain_trim must be a boolean");
      c.pretrain_trim = v.get<bool>();
      continue;
    }
    const auto it = nums.find(k);
    require(it != nums.end(), ErrorKind::ConfigError, "unknown preprocess key: " + k);
    require(v.is_number(), ErrorKind::ConfigError, k + " must be a number");
    *it->second = v.get<double>();
  }
  return c;
}

Matrix canonicalize(const RawRecording& rec, std::vector<double>& present) {
  const std::size_t nc = graph::kNumChannels;
  present.assign(nc, 0.0);
  Matrix out(nc, rec.data.cols());
  std::vector<std::string> ignored;
  for (std::size_t r = 0; r < rec.channels.size(); ++r) {
    const auto idx = graph::canonical_index(rec.channels[r]);
    if (!idx || present[*idx] != 0.0) {
      ignored.push_back(rec.channels[r]);
      continue;
    }
    present[*idx] = 1.0;
    std::copy(rec.data.row(r).begin(), rec.data.row(r).end(), out.row(*idx).begin());
  }
  bool any = false;
  for (double p : present) any = any || p != 0.0;
  require(any, ErrorKind::InvalidInput,
          "recording " + rec.subject_id + " has no recognized 10-20 channels");
  if (!ignored.empty()) {
    std::string list;
    for (const auto& s : ignored) list += (list.empty() ? "" : ",") + s;
    log().info("{}: ignoring channels {}", rec.subject_id, list);
  }
  return out;
}

void filter_channels(Matrix& x, double fs, const PreprocessConfig& cfg) {
  std::vector<Biquad> chain{butter_highpass(cfg.highpass, fs)};
  if (cfg.lowpass < fs / 2) chain.push_back(butter_lowpass(cfg.lowpass, fs));
  for (int k = 1; cfg.notch * k < fs / 2; ++k) {
    if (k > 1 && fs <= cfg.harmonics_above) break;
    chain.push_back(notch(cfg.notch * k, fs, cfg.notch_q));
  }
  const auto pad = static_cast<std::size_t>(std::lround(10 * fs));
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (const auto& s : chain) filtfilt(s, x.row(r), pad);
}

Matrix resample_channels(const Matrix& x, double from, double to) {
  const auto rs = Resampler::for_rates(from, to);
  if (rs.up() == rs.down()) return x;
  Matrix out(x.rows(), rs.output_length(x.cols()));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto y = rs.apply(x.row(r));
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Segment> preprocess(const RawRecording& rec, const PreprocessConfig& cfg,
                                std::size_t recording_index) {
  rec.validate();
  const double seg_samples_d = cfg.segment_seconds * cfg.target_rate;
  const auto seg_n = static_cast<std::size_t>(std::llround(seg_samples_d));
  require(seg_n > 0 && std::abs(seg_samples_d - static_cast<double>(seg_n)) < 1e-9 &&
              seg_n % wavelet::kPatchSamples == 0,
          ErrorKind::ConfigError, "segment length must be a whole number of 256-sample patches");
  if (cfg.pretrain_trim && rec.duration() <= cfg.min_seconds)
    fail(ErrorKind::SkippedRecording,
         rec.subject_id + ": recording of " + std::to_string(rec.duration()) +
             " s is not longer than " + std::to_string(cfg.min_seconds) + " s");

  std::vector<double> present;
  Matrix x = canonicalize(rec, present);
  filter_channels(x, rec.sample_rate, cfg);
  x = resample_channels(x, rec.sample_rate, cfg.target_rate);
  x *= 1e-6 * cfg.scale;

  std::size_t begin = 0, end = x.cols();
  if (cfg.pretrain_trim) {
    const auto cut = static_cast<std::size_t>(std::llround(cfg.trim_seconds * cfg.target_rate));
    begin = std::min(cut, end);
    end = end > cut ? end - cut : 0;
    if (end < begin) end = begin;
  }
  const std::size_t count = (end - begin) / seg_n;
  std::vector<Segment> out;
  out.reserve(count);
  const auto& names = graph::canonical_names();
  for (std::size_t s = 0; s < count; ++s) {
    Segment seg;
    char buf[32];
    std::snprintf(buf, sizeof buf, "_r%03zu_s%04zu", recording_index, s);
    seg.id = rec.subject_id + buf;
    seg.subject_id = rec.subject_id;
    seg.channels.assign(names.begin(), names.end());
    seg.present = present;
    seg.sample_rate = cfg.target_rate;
    seg.scale = cfg.scale;
    seg.label = rec.label;
    seg.data = Matrix(x.rows(), seg_n);
    for (std::size_t r = 0; r < x.rows(); ++r)
      std::copy_n(x.ptr(r, begin + s * seg_n), seg_n, seg.data.ptr(r, 0));
    out.push_back(std::move(seg));
  }
  if (count == 0) log().warn("{}: recording shorter than one segment", rec.subject_id);
  return out;
}

std::vector<Segment> preprocess_many(const std::vector<RawRecording>& recs,
                                     const PreprocessConfig& cfg) {
  std::vector<Segment> out;
  std::map<std::string, double> used;
  std::map<std::string, std::size_t> index;
  for (const auto& rec : recs) {
    const std::size_t ri = index[rec.subject_id]++;
    std::vector<Segment> segs;
    try {
      segs = preprocess(rec, cfg, ri);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SkippedRecording) throw;
      log().info("skipped: {}", e.what());
      continue;
    }
    for (auto& s : segs) {
      double& total = used[s.subject_id];
      if (cfg.pretrain_trim && total + cfg.segment_seconds > cfg.subject_cap_seconds + 1e-9) break;
      total += cfg.segment_seconds;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace mendr::data
