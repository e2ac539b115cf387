#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mendr::data {

// Second-order section with a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

// RBJ cookbook designs. Cutoffs must lie in (0, fs/2).
Biquad butter_lowpass(double fc, double fs);
Biquad butter_highpass(double fc, double fs);
Biquad notch(double f0, double fs, double q = 30.0);

// Magnitude of the frequency response at f.
double magnitude(const Biquad& s, double f, double fs);

// Direct form II transposed with initial state z. z is updated in place.
void lfilter(const Biquad& s, std::span<double> x, double z[2]);

// State that makes a constant input of value 1 a fixed point.
void steady_state(const Biquad& s, double z[2]);

// Zero-phase forward-backward filtering. The signal is extended by even
// reflection (padlen samples per side, clipped to n - 1) and each pass starts
// from the steady state of the mean of its leading padlen samples, which keeps
// the slow high-pass from ringing on a DC offset.
void filtfilt(const Biquad& s, std::span<double> x, std::size_t padlen);

// Rational resampler: upsample by up, low-pass with a Kaiser-windowed sinc at
// the narrower of the two Nyquist limits, decimate by down.
class Resampler {
 public:
  Resampler(std::size_t up, std::size_t down, double beta = 8.6, std::size_t zeros = 32);
  static Resampler for_rates(double from, double to);

  std::size_t up() const noexcept { return up_; }
  std::size_t down() const noexcept { return down_; }
  // ceil(n * up / down)
  std::size_t output_length(std::size_t n) const noexcept;
  std::vector<double> apply(std::span<const double> x) const;
  const std::vector<double>& taps() const noexcept { return h_; }

 private:
  std::size_t up_, down_, half_;
  std::vector<double> h_;
};

// Zeroth-order modified Bessel function of the first kind.
double bessel_i0(double x);

}  // namespace mendr::data
