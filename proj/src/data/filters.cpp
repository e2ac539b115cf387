#include "mendr/data/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "mendr/error.hpp"

namespace mendr::data {

namespace {

struct Rbj {
  double cw, alpha;
};

Rbj rbj(double f, double fs, double q) {
  require(fs > 0 && f > 0 && f < fs / 2, ErrorKind::InvalidInput,
          "filter frequency must lie in (0, fs/2)");
  const double w0 = 2 * std::numbers::pi * f / fs;
  return {std::cos(w0), std::sin(w0) / (2 * q)};
}

Biquad normalized(double b0, double b1, double b2, double a0, double a1, double a2) {
  return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

}  // namespace

Biquad butter_lowpass(double fc, double fs) {
  const auto [c, a] = rbj(fc, fs, std::numbers::sqrt2 / 2);
  return normalized((1 - c) / 2, 1 - c, (1 - c) / 2, 1 + a, -2 * c, 1 - a);
}

Biquad butter_highpass(double fc, double fs) {
  const auto [c, a] = rbj(fc, fs, std::numbers::sqrt2 / 2);
  return normalized((1 + c) / 2, -(1 + c), (1 + c) / 2, 1 + a, -2 * c, 1 - a);
}

Biquad notch(double f0, double fs, double q) {
  const auto [c, a] = rbj(f0, fs, q);
  return normalized(1, -2 * c, 1, 1 + a, -2 * c, 1 - a);
}

double magnitude(const Biquad& s, double f, double fs) {
  const std::complex<double> z = std::polar(1.0, -2 * std::numbers::pi * f / fs);
  const auto num = s.b0 + s.b1 * z + s.b2 * z * z;
  const auto den = 1.0 + s.a1 * z + s.a2 * z * z;
  return std::abs(num / den);
}

void lfilter(const Biquad& s, std::span<double> x, double z[2]) {
  double z1 = z[0], z2 = z[1];
  for (double& v : x) {
    const double in = v;
    const double y = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * y + z2;
    z2 = s.b2 * in - s.a2 * y;
    v = y;
  }
  z[0] = z1;
  z[1] = z2;
}

void steady_state(const Biquad& s, double z[2]) {
  const double y = (s.b0 + s.b1 + s.b2) / (1 + s.a1 + s.a2);
  z[0] = y - s.b0;
  z[1] = s.b2 - s.a2 * y;
}

void filtfilt(const Biquad& s, std::span<double> x, std::size_t padlen) {
  const std::size_t n = x.size();
  if (n == 0) return;
  const std::size_t pad = std::min(padlen, n - 1);
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = x[pad - i];
    ext[pad + n + i] = x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

  double zi[2];
  steady_state(s, zi);
  auto pass = [&] {
    const std::size_t lead = std::max<std::size_t>(1, pad);
    const double level = std::accumulate(ext.begin(), ext.begin() + static_cast<std::ptrdiff_t>(lead), 0.0) /
                         static_cast<double>(lead);
    double z[2] = {zi[0] * level, zi[1] * level};
    lfilter(s, ext, z);
    std::reverse(ext.begin(), ext.end());
  };
  pass();
  pass();
  std::copy_n(ext.begin() + static_cast<std::ptrdiff_t>(pad), n, x.begin());
}

double bessel_i0(double x) {
  double sum = 1, term = 1;
  const double q = x * x / 4;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

Resampler::Resampler(std::size_t up, std::size_t down, double beta, std::size_t zeros)
    : up_(up), down_(down) {
  require(up > 0 && down > 0, ErrorKind::InvalidInput, "resampling factors must be positive");
  const std::size_t g = std::gcd(up, down);
  up_ /= g;
  down_ /= g;
  const std::size_t m = std::max(up_, down_);
  half_ = zeros * m;
  const double fc = 0.5 / static_cast<double>(m);
  h_.resize(2 * half_ + 1);
  const double i0b = bessel_i0(beta);
  for (std::size_t k = 0; k < h_.size(); ++k) {
    const double t = static_cast<double>(k) - static_cast<double>(half_);
    const double arg = 2 * std::numbers::pi * fc * t;
    const double sinc = t == 0 ? 1.0 : std::sin(arg) / arg;
    const double r = t / static_cast<double>(half_);
    const double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1 - r * r))) / i0b;
    h_[k] = 2 * fc * sinc * w;
  }
  const double sum = std::accumulate(h_.begin(), h_.end(), 0.0);
  for (double& v : h_) v *= static_cast<double>(up_) / sum;
}

Resampler Resampler::for_rates(double from, double to) {
  require(from > 0 && to > 0, ErrorKind::InvalidInput, "sample rates must be positive");
  auto integral = [](double r) { return std::abs(r - std::round(r)) < 1e-9; };
  const double k = integral(from) && integral(to) ? 1.0 : 1000.0;
  return Resampler(static_cast<std::size_t>(std::llround(to * k)),
                   static_cast<std::size_t>(std::llround(from * k)));
}

std::size_t Resampler::output_length(std::size_t n) const noexcept {
  return (n * up_ + down_ - 1) / down_;
}

std::vector<double> Resampler::apply(std::span<const double> x) const {
  if (up_ == 1 && down_ == 1) return {x.begin(), x.end()};
  const std::size_t n = x.size(), out_n = output_length(n);
  std::vector<double> y(out_n, 0.0);
  const auto up = static_cast<std::ptrdiff_t>(up_);
  const auto span = static_cast<std::ptrdiff_t>(2 * half_);
  for (std::size_t m = 0; m < out_n; ++m) {
    const auto t = static_cast<std::ptrdiff_t>(m * down_ + half_);
    // Input samples n with 0 <= t - n * up <= 2 * half.
    std::ptrdiff_t lo = t - span <= 0 ? 0 : (t - span + up - 1) / up;
    std::ptrdiff_t hi = std::min<std::ptrdiff_t>(t / up, static_cast<std::ptrdiff_t>(n) - 1);
    double acc = 0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) acc += x[static_cast<std::size_t>(i)] * h_[static_cast<std::size_t>(t - i * up)];
    y[m] = acc;
  }
  return y;
}

}  // namespace mendr::data
