#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "mendr/data/dataset.hpp"
#include "mendr/data/filters.hpp"
#include "mendr/data/preprocess.hpp"
#include "mendr/data/synth.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/wavelet/wavelet.hpp"

using namespace mendr;
using namespace mendr::data;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> tone(std::size_t n, double f, double fs, double amp = 1.0, double phase = 0.3) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::sin(2 * kPi * f * t / fs + phase);
  return x;
}

// Least-squares amplitude of a known-frequency sinusoid over [lo, hi).
double fitted_amplitude(const std::vector<double>& y, double f, double fs, std::size_t lo, std::size_t hi) {
  double ss = 0, sc = 0, cc = 0, ys = 0, yc = 0;
  for (std::size_t t = lo; t < hi; ++t) {
    const double s = std::sin(2 * kPi * f * t / fs), c = std::cos(2 * kPi * f * t / fs);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    ys += y[t] * s;
    yc += y[t] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (ys * cc - yc * sc) / det, b = (yc * ss - ys * sc) / det;
  return std::hypot(a, b);
}

RawRecording make_recording(double seconds, double fs, const std::string& subject,
                            std::vector<std::string> channels = {"Fp1", "Cz", "O2"}) {
  RawRecording r;
  r.sample_rate = fs;
  r.subject_id = subject;
  r.channels = std::move(channels);
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  r.data = Matrix(r.channels.size(), n);
  for (std::size_t c = 0; c < r.channels.size(); ++c) {
    const auto x = tone(n, 5.0 + 3.0 * c, fs, 10.0, 0.1 * c);
    std::copy(x.begin(), x.end(), r.data.row(c).begin());
  }
  return r;
}

}  // namespace

TEST_CASE("biquad designs") {
  const double fs = 256;
  CHECK(std::abs(magnitude(butter_lowpass(30, fs), 30, fs) - std::sqrt(0.5)) < 1e-12);
  CHECK(std::abs(magnitude(butter_highpass(0.1, fs), 0.1, fs) - std::sqrt(0.5)) < 1e-9);
  CHECK(magnitude(butter_lowpass(30, fs), 0, fs) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(magnitude(butter_highpass(0.1, fs), 0, fs) < 1e-12);
  const Biquad n60 = notch(60, fs);
  CHECK(magnitude(n60, 60, fs) < 1e-9);
  CHECK(magnitude(n60, 50, fs) > 0.98);
  CHECK(magnitude(n60, 70, fs) > 0.98);
  // -3 dB edges near f0 +- f0 / (2Q) shrunk by the bilinear warp sin(w0) / w0.
  const double w0 = 2 * kPi * 60 / fs, half = 1.0 * std::sin(w0) / w0;
  CHECK(magnitude(n60, 60 - half, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(0.01));
  CHECK(magnitude(n60, 60 + half, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(0.01));
  CHECK_THROWS_AS(butter_lowpass(200, fs), Error);
  CHECK_THROWS_AS(notch(0, fs), Error);
}

TEST_CASE("lfilter against the difference equation") {
  Rng rng(1);
  const Biquad s = butter_lowpass(20, 128);
  std::vector<double> x(500);
  for (double& v : x) v = rng.normal();
  std::vector<double> ref(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    auto at = [&](const std::vector<double>& v, std::ptrdiff_t i) { return i < 0 ? 0.0 : v[i]; };
    const auto i = static_cast<std::ptrdiff_t>(t);
    ref[t] = s.b0 * x[t] + s.b1 * at(x, i - 1) + s.b2 * at(x, i - 2) - s.a1 * at(ref, i - 1) -
             s.a2 * at(ref, i - 2);
  }
  auto y = x;
  double z[2] = {0, 0};
  lfilter(s, y, z);
  for (std::size_t t = 0; t < x.size(); ++t) CHECK(std::abs(y[t] - ref[t]) < 1e-12);

  // Steady state: a constant input passes at the DC gain from the first sample.
  std::vector<double> c(50, 3.0);
  steady_state(s, z);
  z[0] *= 3;
  z[1] *= 3;
  lfilter(s, c, z);
  for (double v : c) CHECK(std::abs(v - 3.0) < 1e-12);
}

TEST_CASE("filtfilt is zero phase with squared magnitude") {
  const double fs = 256;
  const Biquad s = butter_lowpass(15, fs);
  const std::size_t n = 4096;
  auto y = tone(n, 12, fs, 1.0, 0.0);
  filtfilt(s, y, 512);
  const double g = magnitude(s, 12, fs);
  // Compare against the gain-scaled input away from the edges.
  const auto x = tone(n, 12, fs, g * g, 0.0);
  double err = 0;
  for (std::size_t t = 512; t < n - 512; ++t) err = std::max(err, std::abs(y[t] - x[t]));
  CHECK(err < 1e-6);
}

TEST_CASE("DC offset removed by the high-pass") {
  const double fs = 256, offset = 300.0;
  const std::size_t n = static_cast<std::size_t>(60 * fs);
  Matrix x(1, n);
  const auto sig = tone(n, 10, fs, 5.0);
  for (std::size_t t = 0; t < n; ++t) x(0, t) = offset + sig[t];
  filter_channels(x, fs, PreprocessConfig{});
  double mean = 0;
  for (double v : x.values()) mean += v;
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean) < 0.01 * offset);
}

TEST_CASE("kaiser window helper") {
  for (double x : {0.0, 0.5, 1.0, 5.0, 8.6, 12.0})
    CHECK(bessel_i0(x) == doctest::Approx(std::cyl_bessel_i(0.0, x)).epsilon(1e-13));
}

TEST_CASE("resampler passes tones below 60 Hz") {
  struct Case {
    double from, to, f;
  };
  for (const auto& c : {Case{256, 128, 40}, Case{256, 128, 55}, Case{250, 128, 50}, Case{500, 128, 59},
                        Case{128, 256, 30}, Case{200, 128, 12}}) {
    const auto rs = Resampler::for_rates(c.from, c.to);
    const std::size_t n = static_cast<std::size_t>(20 * c.from);
    const auto y = rs.apply(tone(n, c.f, c.from, 1.0, 0.0));
    CHECK(y.size() == rs.output_length(n));
    CHECK(y.size() == static_cast<std::size_t>(std::ceil(n * c.to / c.from)));
    const std::size_t edge = static_cast<std::size_t>(2 * c.to);
    const double amp = fitted_amplitude(y, c.f, c.to, edge, y.size() - edge);
    INFO(c.from << "->" << c.to << " at " << c.f << " Hz: " << amp);
    CHECK(std::abs(amp - 1.0) < 0.01);
  }
  // Above the output Nyquist the anti-alias filter removes the tone.
  const auto rs = Resampler::for_rates(256, 128);
  const auto y = rs.apply(tone(5120, 90, 256));
  CHECK(fitted_amplitude(y, 128 - 90, 128, 256, y.size() - 256) < 1e-3);
  // Identity ratio copies.
  const auto x = tone(100, 3, 128);
  CHECK(Resampler::for_rates(128, 128).apply(x) == x);
}

TEST_CASE("preprocess durations and skipping") {
  PreprocessConfig cfg;
  cfg.pretrain_trim = true;
  const auto segs = preprocess(make_recording(300, 256, "a"), cfg);
  REQUIRE(segs.size() == 3);
  for (const auto& s : segs) {
    CHECK(s.data.rows() == 19);
    CHECK(s.data.cols() == 7680);
    CHECK(s.sample_rate == 128);
  }
  CHECK(segs[0].id == "a_r000_s0000");
  CHECK(segs[2].id == "a_r000_s0002");

  auto kind_of = [&](const RawRecording& r) {
    try {
      preprocess(r, cfg);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::EmptyInput;
  };
  CHECK(kind_of(make_recording(120, 256, "b")) == ErrorKind::SkippedRecording);
  CHECK(kind_of(make_recording(180, 128, "b")) == ErrorKind::SkippedRecording);
  CHECK(kind_of(make_recording(240, 128, "b", {"X1", "EKG"})) == ErrorKind::InvalidInput);

  cfg.pretrain_trim = false;
  CHECK(preprocess(make_recording(150, 128, "c"), cfg).size() == 2);
  cfg.segment_seconds = 3;
  CHECK_THROWS_AS(preprocess(make_recording(150, 128, "c"), cfg), Error);
}

TEST_CASE("preprocess canonical order, presence and scale") {
  PreprocessConfig cfg;
  cfg.segment_seconds = 16;
  auto rec = make_recording(32, 128, "s", {"O2", "Fp1", "t7", "EKG"});
  const auto segs = preprocess(rec, cfg);
  REQUIRE(segs.size() == 2);
  const auto& s = segs[0];
  const auto& names = graph::canonical_names();
  for (std::size_t c = 0; c < 19; ++c) CHECK(s.channels[c] == names[c]);
  const auto fp1 = *graph::canonical_index("Fp1"), o2 = *graph::canonical_index("O2"),
             t3 = *graph::canonical_index("T3");
  for (std::size_t c = 0; c < 19; ++c) {
    const bool on = c == fp1 || c == o2 || c == t3;
    CHECK(s.present[c] == (on ? 1.0 : 0.0));
    if (!on)
      for (double v : s.data.row(c)) CHECK(v == 0.0);
  }
  // 10 uV at 5 Hz in volts times 1e5 gives amplitude 1.
  std::vector<double> row(s.data.row(o2).begin(), s.data.row(o2).end());
  CHECK(fitted_amplitude(row, 5.0, 128, 256, row.size() - 256) == doctest::Approx(1.0).epsilon(0.005));
}

TEST_CASE("preprocess is idempotent on conformant data") {
  PreprocessConfig cfg;
  cfg.segment_seconds = 32;
  cfg.scale = 1e6;  // net scale 1
  RawRecording r;
  r.sample_rate = 128;
  r.subject_id = "i";
  r.channels = {"Cz", "Pz"};
  const std::size_t n = 32 * 128;
  r.data = Matrix(2, n);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto a = tone(n, 5 + c, 128, 3.0), b = tone(n, 11, 128, 1.0, 1.0 + c), d = tone(n, 23, 128, 0.5);
    for (std::size_t t = 0; t < n; ++t) r.data(c, t) = a[t] + b[t] + d[t];
  }
  const auto once = preprocess(r, cfg).at(0);
  RawRecording again = r;
  again.channels = once.channels;
  again.data = once.data;
  const auto twice = preprocess(again, cfg).at(0);
  const auto cz = *graph::canonical_index("Cz");
  double e1 = 0, e2 = 0;
  for (std::size_t t = 128; t < n - 128; ++t) {
    e1 = std::max(e1, std::abs(once.data(cz, t) - r.data(0, t)));
    e2 = std::max(e2, std::abs(twice.data(cz, t) - once.data(cz, t)));
  }
  // Peak is 4.5; the 0.1 Hz high-pass settles with a ~2 s time constant.
  CHECK(e1 < 0.02 * 4.5);
  CHECK(e2 < 0.02 * 4.5);
}

TEST_CASE("per-subject cap") {
  PreprocessConfig cfg;
  CHECK(cfg.subject_cap_seconds == 3600);
  cfg.pretrain_trim = true;
  cfg.subject_cap_seconds = 600;
  std::vector<RawRecording> recs{make_recording(480, 128, "p", {"Cz"}), make_recording(480, 128, "p", {"Cz"}),
                                 make_recording(480, 128, "q", {"Cz"}), make_recording(100, 128, "q", {"Cz"})};
  const auto segs = preprocess_many(recs, cfg);
  std::map<std::string, double> total;
  for (const auto& s : segs) total[s.subject_id] += s.data.cols() / s.sample_rate;
  CHECK(total["p"] == 600);
  CHECK(total["q"] == 360);
  CHECK(segs.size() == 16);
  CHECK(segs[6].id == "p_r001_s0000");
}

TEST_CASE("dataset round trip") {
  const auto dir = testing::scratch_dir("dataset");
  Rng rng(3);
  std::vector<Segment> segs;
  for (int i = 0; i < 3; ++i) {
    Segment s;
    s.id = "x" + std::to_string(2 - i);
    s.subject_id = "subj";
    s.channels = {"Fp1", "Cz"};
    s.present = {1, 0};
    s.label = i;
    s.data = Matrix(2, 512);
    for (double& v : s.data.values()) v = static_cast<float>(rng.normal());
    segs.push_back(s);
  }
  write_dataset(dir, segs);
  CHECK(list_dataset(dir) == std::vector<std::string>{"x0", "x1", "x2"});
  const auto back = read_dataset(dir);
  REQUIRE(back.size() == 3);
  for (const auto& b : back) {
    const auto& orig = *std::find_if(segs.begin(), segs.end(), [&](const Segment& s) { return s.id == b.id; });
    CHECK(b.data == orig.data);
    CHECK(b.present == orig.present);
    CHECK(b.channels == orig.channels);
    CHECK(b.label == orig.label);
    CHECK(b.scale == orig.scale);
  }

  auto kind_of = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidInput;
  };
  fs::remove(dir / "x1.json");
  CHECK(kind_of([&] { read_dataset(dir); }) == ErrorKind::CorruptDataset);
  std::ofstream(dir / "x2.bin", std::ios::binary | std::ios::trunc) << "abcd";
  CHECK(kind_of([&] { read_segment(dir, "x2"); }) == ErrorKind::CorruptDataset);
  fs::remove(dir / "manifest.json");
  CHECK(kind_of([&] { list_dataset(dir); }) == ErrorKind::CorruptDataset);
  CHECK(kind_of([&] { list_dataset(testing::scratch_dir("empty")); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([&] { list_dataset(dir / "nope"); }) == ErrorKind::IOError);
}

TEST_CASE("large manifest enumerates in sorted order") {
  const auto dir = testing::scratch_dir("manifest");
  Rng rng(4);
  std::vector<Segment> segs;
  for (int i = 0; i < 1000; ++i) {
    Segment s;
    s.id = "seg" + std::to_string(rng.uniform_index(1u << 30)) + "_" + std::to_string(i);
    s.channels = {"Cz"};
    s.present = {1};
    s.data = Matrix(1, 1);
    segs.push_back(s);
  }
  std::vector<std::string> expect;
  for (const auto& s : segs) expect.push_back(s.id);
  std::sort(expect.begin(), expect.end());
  write_dataset(dir, segs);
  CHECK(list_dataset(dir) == expect);
  std::reverse(segs.begin(), segs.end());
  write_dataset(dir, segs);
  CHECK(list_dataset(dir) == expect);
}

TEST_CASE("raw container and CSV") {
  const auto dir = testing::scratch_dir("raw");
  auto r = make_recording(4, 128, "r");
  for (double& v : r.data.values()) v = static_cast<float>(v);
  r.label = 1;
  write_raw(dir / "raw", {r, r});
  const auto back = read_raw(dir / "raw");
  REQUIRE(back.size() == 2);
  CHECK(back[1].data == r.data);
  CHECK(back[1].channels == r.channels);
  CHECK(back[1].label == 1);

  const auto csv = dir / "rec.csv";
  std::ofstream(csv) << "time,Fp1, Cz\n0,1.5,-2\n0.0078125,2.5,3e1\n\n";
  const auto c = read_csv(csv, 128, "c");
  CHECK(c.channels == std::vector<std::string>{"Fp1", "Cz"});
  CHECK(c.data == Matrix{{1.5, 2.5}, {-2, 30}});
  std::ofstream(csv) << "0,1,2\n1,2,3\n";
  CHECK_THROWS_AS(read_csv(csv, 128, "c"), Error);
  std::ofstream(csv) << "t,a\n0,x\n";
  CHECK_THROWS_AS(read_csv(csv, 128, "c"), Error);
  std::ofstream(csv) << "t,a,b\n0,1\n";
  CHECK_THROWS_AS(read_csv(csv, 128, "c"), Error);
  CHECK_THROWS_AS(read_csv(dir / "missing.csv", 128, "c"), Error);
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.n_subjects = 2;
  spec.n_segments = 2;
  spec.segment_seconds = 16;
  spec.noise = 0;
  Rng rng(5);
  for (const auto& s : synth_eeg(spec, rng))
    for (double v : s.recording.data.values()) CHECK(v == 0.0);

  spec.amplitudes = profile("mixed");
  spec.noise = 2;
  Rng a(6), b(6), c(7);
  const auto ra = synth_eeg(spec, a), rb = synth_eeg(spec, b), rc = synth_eeg(spec, c);
  REQUIRE(ra.size() == 2);
  CHECK(ra[0].recording.data == rb[0].recording.data);
  CHECK(ra[1].recording.data == rb[1].recording.data);
  CHECK(ra[0].recording.data != rc[0].recording.data);
  CHECK(ra[0].recording.data != ra[1].recording.data);
  CHECK(ra[0].recording.data.cols() == 32 * 128);
  CHECK(ra[0].recording.subject_id == "s000");
  ra[0].recording.validate();

  CHECK_THROWS_AS(profile("gamma-only"), Error);
  spec.amplitudes[wavelet::Band::beta] = -1;
  CHECK_THROWS_AS(synth_eeg(spec, a), Error);
}

TEST_CASE("alpha-only synthetic data lands in the alpha node") {
  SyntheticSpec spec;
  spec.amplitudes = profile("alpha");
  spec.noise = 0;
  spec.n_subjects = 3;
  spec.n_segments = 1;
  spec.segment_seconds = 16;
  Rng rng(8);
  for (const auto& s : synth_eeg(spec, rng)) {
    const auto& x = s.recording.data;
    double power = 0;
    for (double v : x.values()) power += v * v;
    power /= static_cast<double>(x.size());
    CHECK(s.band_energy.at(wavelet::Band::alpha) == doctest::Approx(power).epsilon(1e-12));
    CHECK(s.band_energy.at(wavelet::Band::beta) == 0.0);
    const auto bd = wavelet::packet_decompose(x, true);
    const auto e = wavelet::band_energies(bd);
    double total = 0;
    for (const auto& [band, v] : e) total += v;
    const double share = e.at(wavelet::Band::alpha) / total;
    INFO("alpha share " << share);
    CHECK(share > 0.8);
    for (const auto& [band, v] : e)
      if (band != wavelet::Band::alpha) CHECK(v < e.at(wavelet::Band::alpha));
  }
}

TEST_CASE("labeled synthetic sets") {
  SyntheticSpec spec;
  spec.n_subjects = 3;
  spec.n_segments = 1;
  spec.segment_seconds = 16;
  Rng rng(9);
  const auto set = synth_labeled(spec, "disjoint", rng);
  REQUIRE(set.size() == 6);
  CHECK(set[0].recording.label == 0);
  CHECK(set[5].recording.label == 1);
  CHECK(set[0].band_energy.at(wavelet::Band::alpha) > 0);
  CHECK(set[0].band_energy.at(wavelet::Band::beta) == 0);
  CHECK(set[5].band_energy.at(wavelet::Band::beta) > 0);
  CHECK(set[5].recording.subject_id == "c1s002");
  CHECK_THROWS_AS(synth_labeled(spec, "other", rng), Error);
}
