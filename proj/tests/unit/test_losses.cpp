#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mendr/error.hpp"
#include "mendr/ssl/losses.hpp"

using namespace mendr;
using namespace mendr::ssl;
using testing::random_matrix;
using testing::rel_frob;

namespace {

std::vector<std::vector<Matrix>> random_band_logs(std::size_t bands, std::size_t n, std::size_t d,
                                                  Rng& rng, double scale = 0.5) {
  std::vector<std::vector<Matrix>> out(bands);
  for (auto& b : out)
    for (std::size_t p = 0; p < n; ++p) b.push_back(testing::random_symmetric(d, rng) * scale);
  return out;
}

// Softmax cross-entropy written out from the definition.
double brute_loo(const std::vector<std::vector<Matrix>>& logs,
                 const std::vector<std::vector<std::size_t>>& neg, double tau) {
  const std::size_t nb = logs.size(), n = logs[0].size();
  double total = 0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t p = 0; p < n; ++p) {
      auto other_mean = [&](std::size_t q) {
        Matrix m(logs[0][0].rows(), logs[0][0].cols());
        for (std::size_t b2 = 0; b2 < nb; ++b2)
          if (b2 != b) m += logs[b2][q];
        return m * (1.0 / static_cast<double>(nb - 1));
      };
      auto logit = [&](std::size_t q) {
        const double d = frobenius_norm(logs[b][p] - other_mean(q));
        return std::exp(tau) / (1.0 + std::log(1.0 + d));
      };
      double denom = std::exp(logit(p));
      for (auto q : neg[p]) denom += std::exp(logit(q));
      total += -std::log(std::exp(logit(p)) / denom);
    }
  return total / static_cast<double>(nb * n);
}

}  // namespace

TEST_CASE("recon loss") {
  Matrix ones(3, 4), zeros(3, 4);
  for (double& v : ones.values()) v = 1.0;
  CHECK(recon_loss(ones, ones) == 0.0);
  CHECK(recon_loss(ones, zeros) == 1.0);
  Rng rng(1);
  const Matrix a = random_matrix(19, 50, rng), b = random_matrix(19, 50, rng);
  double s = 0;
  for (std::size_t i = 0; i < 19; ++i)
    for (std::size_t j = 0; j < 50; ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  CHECK(std::abs(recon_loss(a, b) - s / 950.0) < 1e-12);
  CHECK_THROWS_AS(recon_loss(a, Matrix(19, 49)), Error);
  const Matrix g = recon_loss_grad(a, b);
  CHECK(rel_frob(g, testing::fd_grad([&](const Matrix& v) { return recon_loss(a, v); }, b)) < 1e-7);
}

TEST_CASE("mask sampling") {
  CHECK(mask_count(10, 0.2) == 2);
  CHECK(mask_count(4, 0.2) == 0);
  CHECK(mask_count(30, 0.2) == 6);
  CHECK(mask_count(8, 0.2) == 1);
  Rng rng(2);
  CHECK(sample_mask(10, rng).masked.size() == 2);
  CHECK(sample_mask(4, rng).masked.empty());
  std::vector<int> hits(10, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto plan = sample_mask(10, rng);
    CHECK(std::is_sorted(plan.masked.begin(), plan.masked.end()));
    for (auto i : plan.masked) ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h / 10000.0 - 0.2) < 0.02);
  Rng a(3), b(3);
  CHECK(sample_mask(30, a).masked == sample_mask(30, b).masked);
  CHECK_THROWS_AS(sample_mask(0, rng), Error);
}

TEST_CASE("apply mask") {
  Rng rng(4);
  std::vector<SpdMatrix> seq;
  for (int i = 0; i < 10; ++i) seq.push_back(testing::random_spd(3, rng));
  const SpdMatrix m = testing::random_spd(3, rng);
  MaskPlan empty{10, {}};
  const auto same = apply_mask(seq, empty, m);
  for (int i = 0; i < 10; ++i) CHECK(same[i].matrix() == seq[i].matrix());
  // Patches 6 and 9 (1-based) replaced, as in {A1..A5, M, A7, A8, M, A10}.
  MaskPlan plan{10, {5, 8}};
  const auto out = apply_mask(seq, plan, m);
  for (std::size_t i = 0; i < 10; ++i) {
    const bool masked = i == 5 || i == 8;
    CHECK((out[i].matrix() == (masked ? m.matrix() : seq[i].matrix())));
    CHECK(out[i].min_eigenvalue() > 0.0);
  }
  CHECK_THROWS_AS(apply_mask(seq, MaskPlan{9, {1}}, m), Error);
}

TEST_CASE("mae loss") {
  Rng rng(5);
  const std::size_t d = 4;
  std::vector<SpdMatrix> orig, pred;
  for (int i = 0; i < 6; ++i) {
    orig.push_back(testing::random_spd(d, rng));
    pred.push_back(testing::random_spd(d, rng));
  }
  MaskPlan plan{6, {1, 4}};
  CHECK(mae_loss(orig, orig, plan) == 0.0);

  std::vector<SpdMatrix> eye(1, SpdMatrix(Matrix::identity(d)));
  std::vector<SpdMatrix> e_eye(1, SpdMatrix(Matrix::identity(d) * std::exp(1.0)));
  CHECK(mae_loss(eye, e_eye, MaskPlan{1, {0}}) == doctest::Approx(static_cast<double>(d)).epsilon(1e-12));

  const double base = mae_loss(orig, pred, plan);
  auto pred2 = pred;
  pred2[0] = testing::random_spd(d, rng);
  pred2[5] = testing::random_spd(d, rng);
  CHECK(mae_loss(orig, pred2, plan) == base);

  std::vector<Matrix> ol, pl;
  for (int i = 0; i < 6; ++i) {
    ol.push_back(spd_log(orig[i]).matrix());
    pl.push_back(spd_log(pred[i]).matrix());
  }
  CHECK(std::abs(mae_loss_logs(ol, pl, plan) - base) < 1e-10);
  std::vector<Matrix> grads;
  mae_loss_logs(ol, pl, plan, &grads);
  for (std::size_t i = 0; i < 6; ++i) {
    const Matrix fd = testing::fd_sym_grad(
        [&](const Matrix& v) {
          auto p2 = pl;
          p2[i] = v;
          return mae_loss_logs(ol, p2, plan);
        },
        pl[i]);
    if (i == 1 || i == 4) {
      CHECK(rel_frob(grads[i], fd) < 1e-6);
    } else {
      CHECK(max_abs(grads[i]) == 0.0);
      CHECK(max_abs(fd) == 0.0);
    }
  }
  CHECK(mae_loss(orig, pred, MaskPlan{6, {}}) == 0.0);
}

TEST_CASE("loo loss uniform logits") {
  const std::size_t n = 40;
  std::vector<std::vector<Matrix>> logs(5, std::vector<Matrix>(n, Matrix::identity(6) * 0.3));
  Rng rng(6);
  const auto neg = sample_negatives(n, 32, rng);
  for (double tau : {0.0, 1.0, 2.5})
    CHECK(std::abs(loo_loss(logs, neg, tau) - std::log(33.0)) < 1e-9);
}

TEST_CASE("loo loss against brute force") {
  Rng rng(7);
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t nb = 2 + inst % 4, n = 6 + inst, nneg = 3 + inst % 3;
    const auto logs = random_band_logs(nb, n, 3, rng);
    const auto neg = sample_negatives(n, nneg, rng);
    const double tau = rng.uniform(-1.0, 2.0);
    CHECK(std::abs(loo_loss(logs, neg, tau) - brute_loo(logs, neg, tau)) < 1e-10);
  }
}

TEST_CASE("loo loss limit, permutation and errors") {
  Rng rng(8);
  const std::size_t n = 34;
  // Every band identical within a patch, patches far apart.
  std::vector<std::vector<Matrix>> logs(3);
  for (std::size_t p = 0; p < n; ++p) {
    const Matrix m = testing::random_symmetric(3, rng) * 1e4;
    for (auto& b : logs) b.push_back(m);
  }
  auto neg = sample_negatives(n, 32, rng);
  CHECK(loo_loss(logs, neg, 6.0) < 1e-6);

  const auto rl = random_band_logs(3, n, 3, rng);
  const double a = loo_loss(rl, neg, 1.0);
  for (auto& v : neg) std::reverse(v.begin(), v.end());
  CHECK(std::abs(loo_loss(rl, neg, 1.0) - a) < 1e-12);

  CHECK_THROWS_AS(sample_negatives(32, 32, rng), Error);
  try {
    sample_negatives(10, 32, rng);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientNegatives);
  }
  const auto one_band = std::vector<std::vector<Matrix>>(1, rl[0]);
  CHECK_THROWS_AS(loo_loss(one_band, neg, 1.0), Error);
}

TEST_CASE("loo loss gradients") {
  Rng rng(9);
  const std::size_t nb = 3, n = 7;
  const auto logs = random_band_logs(nb, n, 3, rng);
  const auto neg = sample_negatives(n, 4, rng);
  const double tau = 0.7;
  LooGrads g;
  loo_loss(logs, neg, tau, &g);
  const double h = 1e-6;
  CHECK(std::abs(g.tau - (loo_loss(logs, neg, tau + h) - loo_loss(logs, neg, tau - h)) / (2 * h)) < 1e-7);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t p = 0; p < n; ++p) {
      const Matrix fd = testing::fd_grad(
          [&](const Matrix& v) {
            auto l2 = logs;
            l2[b][p] = v;
            return loo_loss(l2, neg, tau);
          },
          logs[b][p]);
      CHECK(rel_frob(g.logs[b][p], fd) < 1e-6);
    }
}

TEST_CASE("pretrain schedule") {
  const auto ae = pretrain_schedule("autoencoder");
  CHECK(ae.lr == 1e-4);
  CHECK(ae.epochs == 30);
  CHECK(ae.weight_decay == 0.001);
  CHECK(ae.clip == 1e7);
  const auto wc = pretrain_schedule("wavelet", 4);
  CHECK(wc.lr == 1e-3);
  CHECK(wc.total_steps() == 20);
  CHECK(wc.lr_at(0) == 1e-3);
  CHECK(wc.lr_at(19) == doctest::Approx(1e-7).epsilon(1e-12));
  StagePlan p = wc;
  p.epochs = 3;
  p.steps_per_epoch = 1;
  CHECK(std::abs(p.lr_at(1) - (1e-3 + 1e-7) / 2) < 1e-12);
  CHECK_THROWS_AS(pretrain_schedule("finetune"), Error);
}
