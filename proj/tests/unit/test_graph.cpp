#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/graph/harmonizer.hpp"

using namespace mendr;
using namespace mendr::graph;
using testing::fd_grad;
using testing::random_matrix;
using testing::rel_frob;

namespace {

Point3 random_unit(Rng& rng) {
  Point3 p{rng.normal(), rng.normal(), rng.normal()};
  const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  return {p[0] / n, p[1] / n, p[2] / n};
}

std::size_t idx(std::string_view n) { return *canonical_index(n); }

// Channels driven by a few point sources with Gaussian spatial falloff.
Matrix smooth_field(std::size_t cols, Rng& rng) {
  const auto es = ElectrodeSet::standard();
  Matrix out(kNumChannels, cols);
  for (int s = 0; s < 3; ++s) {
    const Point3 src = es.coords[rng.uniform_index(kNumChannels)];
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const double d = geodesic_distance(src, es.coords[c]);
      const double w = std::exp(-d * d / (2 * 0.6 * 0.6));
      for (std::size_t t = 0; t < cols; ++t) out(c, t) += w * std::sin(0.3 * t * (s + 1) + s);
    }
  }
  for (double& v : out.values()) v += 0.05 * rng.normal();
  return out;
}

}  // namespace

TEST_CASE("geodesic distance examples") {
  const Point3 n{0, 0, 1}, s{0, 0, -1}, x{1, 0, 0};
  CHECK(geodesic_distance(n, n) == 0.0);
  CHECK(geodesic_distance(n, s) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  CHECK(geodesic_distance(n, x) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK(geodesic_distance({0, 0, 2}, {2, 0, 0}, 2.0) == doctest::Approx(std::numbers::pi));
  CHECK_THROWS_AS(geodesic_distance({0, 0, 1.1}, x), Error);
  // Rounding that pushes the cosine past 1 must not produce NaN.
  const Point3 a{0.6, 0.8, 0.0};
  CHECK(std::isfinite(geodesic_distance(a, a)));
}

TEST_CASE("standard electrode set") {
  const auto es = ElectrodeSet::standard();
  REQUIRE(es.names.size() == kNumChannels);
  CHECK(es.names.front() == "Fp1");
  CHECK(es.names.back() == "O2");
  std::set<std::string> uniq(es.names.begin(), es.names.end());
  CHECK(uniq.size() == kNumChannels);
  for (const auto& p : es.coords)
    CHECK(std::abs(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0) < 1e-9);
  // Cz on top, Fz in front, T4 on the right.
  CHECK(es.coords[idx("Cz")][2] == doctest::Approx(1.0));
  CHECK(es.coords[idx("Fz")][1] > 0.5);
  CHECK(es.coords[idx("T4")][0] > 0.9);
  CHECK(canonical_index("t7") == idx("T3"));
  CHECK(canonical_index("P8") == idx("T6"));
  CHECK_FALSE(canonical_index("Oz").has_value());
}

TEST_CASE("geodesic graph invariants") {
  const auto& g = standard_graph();
  double mx = 0;
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    CHECK(g.dist(i, i) == 0.0);
    for (std::size_t j = 0; j < kNumChannels; ++j) {
      CHECK(g.dist(i, j) == g.dist(j, i));
      mx = std::max(mx, g.dist(i, j));
    }
  }
  CHECK(mx == 1.0);
  CHECK(g.dist(idx("Fp1"), idx("Fp2")) < g.dist(idx("Fp1"), idx("O2")));
  CHECK(g.dist(idx("C3"), idx("Cz")) < g.dist(idx("C3"), idx("C4")));

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    ElectrodeSet es = ElectrodeSet::standard();
    for (auto& p : es.coords) p = random_unit(rng);
    const auto raw = build_graph(es, false);
    bool ok = true;
    for (std::size_t i = 0; i < kNumChannels; ++i) {
      ok &= raw.dist(i, i) == 0.0;
      for (std::size_t j = 0; j < kNumChannels; ++j)
        ok &= raw.dist(i, j) == raw.dist(j, i) && raw.dist(i, j) >= 0.0 &&
              raw.dist(i, j) <= std::numbers::pi;
    }
    CHECK(ok);
  }
}

TEST_CASE("montage json") {
  nlohmann::json j;
  j["Cz"] = {0.0, 0.0, 5.0};
  j["fp1"] = {-0.3, 0.95, 0.05};
  const auto es = ElectrodeSet::from_json(j);
  CHECK(es.present[idx("Cz")] == 1.0);
  CHECK(es.present[idx("Fp1")] == 1.0);
  CHECK(es.present[idx("O2")] == 0.0);
  CHECK(es.coords[idx("Cz")][2] == doctest::Approx(1.0));
  nlohmann::json bad;
  bad["Oz"] = {0.0, -1.0, 0.0};
  CHECK_THROWS_AS(ElectrodeSet::from_json(bad), Error);
}

TEST_CASE("channel dropout") {
  wavelet::BandDecomposition bd;
  bd.n_patches = 1;
  Rng data(4);
  bd.bands[wavelet::Band::alpha] = random_matrix(kNumChannels, 16, data);
  bd.bands[wavelet::Band::delta] = random_matrix(kNumChannels, 8, data);

  Rng rng(5);
  const auto same = channel_dropout(bd, 0.0, rng);
  CHECK(same.bands.at(wavelet::Band::alpha) == bd.at(wavelet::Band::alpha));
  for (double m : same.mask) CHECK(m == 1.0);

  std::size_t dropped = 0, total = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto mask = sample_channel_mask(kNumChannels, 0.5, rng);
    for (double m : mask) dropped += m == 0.0;
    total += kNumChannels;
  }
  CHECK(std::abs(static_cast<double>(dropped) / total - 0.5) < 0.02);

  Rng a(9), b(9);
  CHECK(channel_dropout(bd, 0.3, a).mask == channel_dropout(bd, 0.3, b).mask);

  Rng c(10);
  const auto d = channel_dropout(bd, 0.9, c);
  std::size_t kept = 0;
  for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
    kept += d.mask[ch] > 0;
    if (d.mask[ch] == 0.0)
      for (std::size_t t = 0; t < 8; ++t) CHECK(d.bands.at(wavelet::Band::delta)(ch, t) == 0.0);
  }
  CHECK(kept >= 1);

  std::vector<double> base(kNumChannels, 1.0);
  base[3] = 0.0;
  for (int trial = 0; trial < 50; ++trial)
    CHECK(sample_channel_mask(kNumChannels, 0.2, rng, &base)[3] == 0.0);

  CHECK_THROWS_AS(channel_dropout(bd, 1.0, rng), Error);
  CHECK_THROWS_AS(channel_dropout(bd, -0.1, rng), Error);
}

TEST_CASE("squeeze excitation") {
  Rng rng(11);
  ParameterSet ps;
  const auto se = make_se("t", kNumChannels, ps, rng);
  const Matrix x = random_matrix(kNumChannels, 12, rng);
  CHECK(rel_frob(se_forward(se, x), 0.5 * x) < 1e-15);
  CHECK(max_abs(se_forward(se, Matrix(kNumChannels, 12))) == 0.0);

  se.w2->value = random_matrix(kNumChannels, kNumChannels, rng, 3.0);
  se.b2->value = random_matrix(1, kNumChannels, rng);
  SeCache cache;
  se_forward(se, x * 10.0, &cache);
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    CHECK(cache.z(0, i) > 0.0);
    CHECK(cache.z(0, i) < 1.0);
  }

  const Matrix r = random_matrix(kNumChannels, 12, rng);
  ps.zero_grad();
  se_forward(se, x, &cache);
  const Matrix gx = se_backward(se, cache, r);
  CHECK(rel_frob(gx, fd_grad([&](const Matrix& xx) { return inner(se_forward(se, xx), r); }, x)) <
        1e-6);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    Parameter& prm = ps[p];
    const Matrix orig = prm.value;
    const Matrix fd = fd_grad(
        [&](const Matrix& v) {
          prm.value = v;
          const double f = inner(se_forward(se, x), r);
          prm.value = orig;
          return f;
        },
        orig);
    CHECK_MESSAGE(rel_frob(prm.grad, fd) < 1e-6, prm.name);
  }
}

TEST_CASE("harmonizer identity start and imputation mixing") {
  Rng rng(12);
  ParameterSet ps;
  Harmonizer hz("h", 8, ps, rng);
  const Matrix& dist = standard_graph().dist;
  const Matrix x = smooth_field(8, rng);
  std::vector<double> all(kNumChannels, 1.0);

  const Matrix y = hz.blocks_forward(x, all, dist);
  CHECK(rel_frob(y, x) < 0.05);
  CHECK(rel_frob(hz.forward(x, all, dist), 0.5 * x) < 0.05);
  CHECK(hz.forward(x, all, dist) == hz.forward(x, all, dist));

  auto mask = all;
  mask[idx("C3")] = 0.0;
  Matrix xd = x;
  for (std::size_t t = 0; t < 8; ++t) xd(idx("C3"), t) = 0.0;
  const Matrix yd = hz.blocks_forward(xd, mask, dist);
  double e = 0;
  for (std::size_t t = 0; t < 8; ++t) e += yd(idx("C3"), t) * yd(idx("C3"), t);
  CHECK(e > 1e-6);

  for (std::size_t k = 0; k < kHarmonizerBlocks; ++k) {
    const Matrix a = hz.attention(xd, mask, dist, k);
    for (std::size_t i = 0; i < kNumChannels; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < kNumChannels; ++j) s += a(i, j);
      CHECK(std::abs(s - 1.0) < 1e-10);
    }
  }

  std::vector<double> none(kNumChannels, 0.0);
  none[0] = 1.0;
  CHECK(hz.forward(x, none, dist).rows() == kNumChannels);
  CHECK_THROWS_AS(hz.forward(Matrix(18, 8), std::vector<double>(18, 1.0), dist), Error);
  CHECK_THROWS_AS(hz.forward(Matrix(kNumChannels, 7), all, dist), Error);
}

TEST_CASE("harmonizer backward matches finite differences") {
  Rng rng(13);
  ParameterSet ps;
  const std::size_t t = 4;
  Harmonizer hz("h", t, ps, rng);
  // Move off the zero-initialized maps so every path carries gradient.
  for (std::size_t p = 0; p < ps.size(); ++p)
    ps[p].value += random_matrix(ps[p].value.rows(), ps[p].value.cols(), rng, 0.3);
  const Matrix& dist = standard_graph().dist;
  const Matrix x = random_matrix(kNumChannels, 2 * t, rng);
  std::vector<double> mask(kNumChannels, 1.0);
  mask[2] = mask[11] = 0.0;
  const Matrix r = random_matrix(kNumChannels, 2 * t, rng);

  ps.zero_grad();
  HarmonizerCache cache;
  hz.forward(x, mask, dist, &cache);
  const Matrix gx = hz.backward(cache, dist, r);
  const auto loss = [&] { return inner(hz.forward(x, mask, dist), r); };

  CHECK(rel_frob(gx, fd_grad([&](const Matrix& xx) { return inner(hz.forward(xx, mask, dist), r); },
                             x)) < 1e-6);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    Parameter& prm = ps[p];
    const Matrix orig = prm.value;
    const Matrix fd = fd_grad(
        [&](const Matrix& v) {
          prm.value = v;
          const double f = loss();
          prm.value = orig;
          return f;
        },
        orig);
    CHECK_MESSAGE(rel_frob(prm.grad, fd) < 1e-6, prm.name);
  }
}

TEST_CASE("imputation training beats zero filling") {
  Rng rng(14);
  std::vector<Matrix> train, test;
  for (int i = 0; i < 4; ++i) train.push_back(smooth_field(16, rng));
  for (int i = 0; i < 2; ++i) test.push_back(smooth_field(16, rng));
  ImputationConfig cfg;
  cfg.steps = 20;
  cfg.seed = 1;
  const auto rep = train_imputation(train, test, 8, cfg);
  CHECK(rep.train_loss.back() < rep.train_loss.front());
  CHECK(rep.heldout_mse < rep.baseline_mse);
}
