#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/io.hpp"
#include "mendr/model/model.hpp"

using namespace mendr;
using namespace mendr::model;
using testing::fd_grad;
using testing::random_matrix;
using testing::rel_frob;
using wavelet::Band;

namespace {

constexpr std::size_t kC = graph::kNumChannels;

// Checks every parameter whose name starts with prefix against central
// differences of f. grads must already be accumulated for f.
template <class F>
void check_param_grads(ParameterSet& ps, const std::string& prefix, F&& f, double tol) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Parameter& p = ps[i];
    if (p.name.rfind(prefix, 0) != 0) continue;
    const Matrix orig = p.value;
    const Matrix fd = fd_grad(
        [&](const Matrix& v) {
          p.value = v;
          const double r = f();
          p.value = orig;
          return r;
        },
        orig);
    const double err = frobenius_norm(p.grad - fd) / std::max(1e-8, frobenius_norm(fd));
    CHECK_MESSAGE(err < tol, p.name << " rel err " << err);
  }
}

void perturb(ParameterSet& ps, const std::string& prefix, Rng& rng, double sd) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].name.rfind(prefix, 0) == 0 && ps[i].group == ParamGroup::euclidean)
      ps[i].value += random_matrix(ps[i].value.rows(), ps[i].value.cols(), rng, sd);
}

std::vector<Matrix> random_logs(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix s = testing::random_symmetric(d, rng);
    s *= 0.5;
    out.push_back(s);
  }
  return out;
}

double seq_inner(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += inner(a[i], b[i]);
  return s;
}

}  // namespace

TEST_CASE("encoder configs") {
  const std::array<std::size_t, 6> th{8, 8, 8, 16, 16, 16};
  for (std::size_t i = 0; i < 6; ++i) {
    const auto c = encoder_config(wavelet::kAllBands[i]);
    CHECK(c.patch_length == wavelet::patch_length(wavelet::kAllBands[i]));
    CHECK(c.t_hidden == th[i]);
    CHECK(c.patch_length == c.t_hidden * c.strides[0] * c.strides[1] * c.strides[2]);
  }
}

TEST_CASE("encoder shapes, zero input and gradients") {
  Rng rng(1);
  ParameterSet ps;
  const auto cfg = encoder_config(Band::beta);
  BandEncoder enc(cfg, "enc", ps, rng);
  std::vector<double> mask(kC, 1.0);
  const Matrix zero(kC, 3 * cfg.patch_length);
  const Matrix z = enc.forward(zero, mask);
  CHECK(z.rows() == kC);
  CHECK(z.cols() == 3 * cfg.t_hidden);
  CHECK(max_abs(z) == 0.0);
  CHECK_THROWS_AS(enc.forward(Matrix(kC, 31), mask), Error);

  // Thirty patches in, thirty patch embeddings out.
  CHECK(enc.forward(random_matrix(kC, 30 * cfg.patch_length, rng), mask).cols() == 30 * cfg.t_hidden);

  ParameterSet ps2;
  const auto small = encoder_config(Band::alpha);
  BandEncoder enc2(small, "enc", ps2, rng);
  perturb(ps2, "enc", rng, 0.2);
  const Matrix x = random_matrix(kC, 2 * small.patch_length, rng);
  mask[4] = 0.0;
  const Matrix r = random_matrix(kC, 2 * small.t_hidden, rng);
  ps2.zero_grad();
  BandEncoder::Cache cache;
  enc2.forward(x, mask, &cache);
  const Matrix gx = enc2.backward(cache, r);
  // Harmonizer weights are checked in the graph tests; its input gradient is
  // covered through gx below.
  const auto f = [&] { return inner(enc2.forward(x, mask), r); };
  check_param_grads(ps2, "enc.conv", f, 1e-5);
  check_param_grads(ps2, "enc.gn", f, 1e-5);
  check_param_grads(ps2, "enc.harm.gat2", f, 1e-5);
  CHECK(rel_frob(gx, fd_grad([&](const Matrix& v) { return inner(enc2.forward(v, mask), r); }, x)) < 1e-5);
}

TEST_CASE("decoder zero output, shapes and gradients") {
  Rng rng(2);
  ParameterSet ps;
  const auto cfg = encoder_config(Band::alpha);
  BandDecoder dec(cfg, "dec", ps, rng);
  const Matrix z0(kC, 2 * cfg.t_hidden);
  const Matrix lat0(kC, cfg.t_hidden);
  CHECK(max_abs(dec.forward(z0, &lat0)) == 0.0);
  CHECK(dec.forward(z0, nullptr).cols() == 2 * cfg.patch_length);

  perturb(ps, "dec", rng, 0.2);
  const Matrix z = random_matrix(kC, 2 * cfg.t_hidden, rng);
  Matrix lat = random_matrix(kC, cfg.t_hidden, rng);
  const Matrix r = random_matrix(kC, 2 * cfg.patch_length, rng);
  ps.zero_grad();
  BandDecoder::Cache cache;
  dec.forward(z, &lat, &cache);
  Matrix glat(kC, cfg.t_hidden);
  const Matrix gz = dec.backward(cache, r, &glat);
  check_param_grads(ps, "dec", [&] { return inner(dec.forward(z, &lat), r); }, 1e-5);
  CHECK(rel_frob(gz, fd_grad([&](const Matrix& v) { return inner(dec.forward(v, &lat), r); }, z)) < 1e-5);
  CHECK(rel_frob(glat, fd_grad([&](const Matrix& v) { return inner(dec.forward(z, &v), r); }, lat)) < 1e-5);
}

TEST_CASE("subject table") {
  ParameterSet ps;
  SubjectTable t({"s1", "s2"}, {Band::delta, Band::alpha}, ps);
  CHECK(t.latent("s1", Band::alpha) != nullptr);
  CHECK(t.latent("s3", Band::alpha) == nullptr);
  CHECK(max_abs(t.latent("s2", Band::delta)->value) == 0.0);
}

TEST_CASE("patch MLP and ACPE") {
  Rng rng(3);
  ParameterSet ps;
  const std::size_t th = 4, n = 5;
  PatchMlp mlp("mlp", th, ps, rng);
  Acpe acpe("acpe", th, ps);
  const Matrix s = random_matrix(kC, n * th, rng);
  CHECK(acpe.forward(s) == s);

  acpe.kernel().value = random_matrix(th, 3 * kC, rng, 0.3);
  // Translation along patches: shifting the input shifts interior outputs.
  Matrix shifted(kC, n * th);
  for (std::size_t c = 0; c < kC; ++c)
    for (std::size_t j = th; j < n * th; ++j) shifted(c, j) = s(c, j - th);
  const Matrix a = acpe.forward(s), b = acpe.forward(shifted);
  for (std::size_t c = 0; c < kC; ++c)
    for (std::size_t p = 2; p + 1 < n; ++p)
      for (std::size_t t = 0; t < th; ++t)
        CHECK(b(c, p * th + t) == doctest::Approx(a(c, (p - 1) * th + t)).epsilon(1e-12));

  const Matrix r = random_matrix(kC, n * th, rng);
  ps.zero_grad();
  PatchMlp::Cache mc;
  mlp.forward(s, &mc);
  const Matrix gm = mlp.backward(mc, r);
  check_param_grads(ps, "mlp", [&] { return inner(mlp.forward(s), r); }, 1e-6);
  CHECK(rel_frob(gm, fd_grad([&](const Matrix& v) { return inner(mlp.forward(v), r); }, s)) < 1e-6);

  ps.zero_grad();
  const Matrix ga = acpe.backward(s, r);
  check_param_grads(ps, "acpe", [&] { return inner(acpe.forward(s), r); }, 1e-6);
  CHECK(rel_frob(ga, fd_grad([&](const Matrix& v) { return inner(acpe.forward(v), r); }, s)) < 1e-6);
}

TEST_CASE("SCM projection") {
  Rng rng(4);
  const std::size_t th = 8;
  Matrix s = random_matrix(kC, 3 * th, rng);
  for (std::size_t c = 0; c < kC; ++c)
    for (std::size_t t = 0; t < th; ++t) s(c, 2 * th + t) = s(c, t);
  const auto seq = to_spd_sequence(s, th);
  REQUIRE(seq.size() == 3);
  CHECK(seq[0] == seq[2]);
  for (const auto& m : seq) CHECK(SpdMatrix(m).min_eigenvalue() > 0.0);
  CHECK_THROWS_AS(to_spd_sequence(Matrix(kC, 3), 1), Error);

  std::vector<Matrix> g;
  for (int i = 0; i < 3; ++i) g.push_back(testing::random_symmetric(kC, rng));
  const Matrix gs = to_spd_backward(s, th, g);
  CHECK(rel_frob(gs, fd_grad([&](const Matrix& v) { return seq_inner(to_spd_sequence(v, th), g); }, s)) <
        1e-6);
}

TEST_CASE("reduction by a canonical-basis BiMap is the principal submatrix") {
  Rng rng(5);
  const Matrix a = testing::random_spd_matrix(kC, rng);
  Matrix w(6, kC);
  for (std::size_t i = 0; i < 6; ++i) w(i, i) = 1.0;
  const SpdMatrix r = bimap_forward(w, SpdMatrix(a));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(r(i, j) == doctest::Approx(a(i, j)).epsilon(1e-14));
  CHECK(r.min_eigenvalue() > 0.0);
}

TEST_CASE("manifold transformer") {
  Rng rng(6);
  ParameterSet ps;
  ManifoldTransformer tr("tr", 5, 2, ps, rng);

  // Zero layers is the identity.
  ParameterSet ps0;
  ManifoldTransformer none("none", 5, 0, ps0, rng);
  const auto logs = random_logs(4, 5, rng);
  CHECK(none.forward(logs) == logs);

  const Matrix w = tr.attention(logs, 0);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += w(i, j);
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  const auto single = std::vector<Matrix>{logs[0]};
  CHECK(tr.attention(single, 0)(0, 0) == 1.0);

  const std::vector<Matrix> same(3, logs[1]);
  const auto out_same = tr.forward(same);
  CHECK(rel_frob(out_same[0], out_same[2]) < 1e-12);

  const auto out1 = tr.forward(logs), out2 = tr.forward(logs);
  CHECK(out1 == out2);

  std::size_t probes = 0;
  double min_seen = 1e300;
  SpdProbe probe = [&](const std::string&, double v) {
    ++probes;
    min_seen = std::min(min_seen, v);
  };
  tr.forward(logs, nullptr, &probe);
  CHECK(probes == 2 * 4 * 6);
  CHECK(min_seen > 0.0);

  const auto r = random_logs(4, 5, rng);
  ps.zero_grad();
  ManifoldTransformer::Cache cache;
  tr.forward(logs, &cache);
  const auto gin = tr.backward(cache, r);
  check_param_grads(ps, "tr", [&] { return seq_inner(tr.forward(logs), r); }, 1e-5);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const Matrix fd = testing::fd_sym_grad(
        [&](const Matrix& v) {
          auto l2 = logs;
          l2[i] = v;
          return seq_inner(tr.forward(l2), r);
        },
        logs[i]);
    CHECK(rel_frob(gin[i], fd) < 1e-5);
  }
}

TEST_CASE("band frontend gradients with and without reduction") {
  Rng rng(7);
  ParameterSet ps;
  const std::size_t th = 8;
  BandFrontend fe("fe", th, ps, rng);
  Parameter& red = ps.add("red", ParamGroup::stiefel, stiefel_init(6, kC, rng));
  perturb(ps, "fe", rng, 0.1);
  const Matrix f = random_matrix(kC, 3 * th, rng);
  for (const Parameter* reduce : {static_cast<const Parameter*>(nullptr), static_cast<const Parameter*>(&red)}) {
    const std::size_t d = reduce ? 6 : kC;
    const auto r = random_logs(3, d, rng);
    ps.zero_grad();
    BandFrontend::Cache cache;
    const auto logs = fe.forward(f, reduce, &cache);
    REQUIRE(logs.size() == 3);
    CHECK(logs[0].rows() == d);
    fe.backward(cache, const_cast<Parameter*>(reduce), r);
    check_param_grads(ps, reduce ? "" : "fe", [&] { return seq_inner(fe.forward(f, reduce), r); }, 2e-5);
  }
}

TEST_CASE("band combination") {
  Matrix two = Matrix::identity(3) * 2.0;
  const auto c = combine_band_logs({{Matrix(3, 3)}, {two}});
  const SpdMatrix e = spd_exp(SymmetricMatrix(c[0]));
  for (std::size_t i = 0; i < 3; ++i) CHECK(e(i, i) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(combine_band_logs({{two}, {two, two}}), Error);
}

TEST_CASE("model embedding stays SPD and checkpoints round-trip") {
  ModelConfig cfg;
  cfg.kind = ContextKind::large;
  cfg.wavelet_layers = 2;
  cfg.combined_layers = 2;
  cfg.subjects = {"a"};
  Model m(cfg, 11);
  Rng rng(8);
  const Matrix x = random_matrix(kC, 2 * wavelet::kPatchSamples, rng);
  const auto bd = wavelet::packet_decompose(x, false);
  std::vector<double> mask(kC, 1.0);
  double mn = 1e300;
  SpdProbe probe = [&](const std::string&, double v) { mn = std::min(mn, v); };
  const auto e = embed(m, bd, mask, &probe);
  CHECK(mn > 0.0);
  CHECK(e.combined.size() == 2);
  CHECK(e.combined[0].rows() == 6);

  const auto dir = std::filesystem::temp_directory_path() / "mendr_test_ckpt";
  std::filesystem::create_directories(dir);
  m.stages().push_back("autoencoder");
  save_checkpoint(m, dir / "a.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  REQUIRE(back->params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(back->params()[i].value == m.params()[i].value);
  CHECK(back->stages() == m.stages());
  save_checkpoint(*back, dir / "b.ckpt");
  CHECK(io::read_text(dir / "a.ckpt") == io::read_text(dir / "b.ckpt"));
  const auto e2 = embed(*back, bd, mask);
  CHECK(e2.combined == e.combined);

  io::write_text(dir / "bad.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model config rejects unknown keys") {
  nlohmann::json j = ModelConfig{}.to_json();
  CHECK(ModelConfig::from_json(j).kind == ContextKind::tiny);
  j["frobnicate"] = 1;
  CHECK_THROWS_AS(ModelConfig::from_json(j), Error);
}
