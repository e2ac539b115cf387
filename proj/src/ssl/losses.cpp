#include "mendr/ssl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mendr/autodiff/params.hpp"
#include "mendr/error.hpp"
#include "mendr/log.hpp"
#include "mendr/model/nn.hpp"

namespace mendr::ssl {

double recon_loss(const Matrix& x, const Matrix& xr) {
  require(x.rows() == xr.rows() && x.cols() == xr.cols(), ErrorKind::ShapeError,
          "recon_loss shape mismatch");
  require(x.size() > 0, ErrorKind::EmptyInput, "recon_loss on an empty signal");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - xr.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

Matrix recon_loss_grad(const Matrix& x, const Matrix& xr) {
  require(x.rows() == xr.rows() && x.cols() == xr.cols(), ErrorKind::ShapeError,
          "recon_loss shape mismatch");
  Matrix g = xr - x;
  g *= 2.0 / static_cast<double>(x.size());
  return g;
}

std::size_t mask_count(std::size_t n, double ratio) {
  // Round ratio to a rational with denominator 10^6 so 0.2 * 10 is exactly 2.
  const auto num = static_cast<std::size_t>(std::llround(ratio * 1e6));
  return n * num / 1000000;
}

MaskPlan sample_mask(std::size_t n, Rng& rng, double ratio) {
  require(n >= 1, ErrorKind::InvalidInput, "sample_mask needs n >= 1");
  MaskPlan plan;
  plan.n = n;
  const std::size_t k = mask_count(n, ratio);
  if (k == 0) {
    log().warn("mask count floor({} * {}) is 0; masked loss will be 0", ratio, n);
    return plan;
  }
  plan.masked = rng.sample_without_replacement(n, k);
  std::sort(plan.masked.begin(), plan.masked.end());
  return plan;
}

namespace {

void check_plan(const MaskPlan& plan, std::size_t n) {
  require(plan.n == n, ErrorKind::ShapeError,
          "mask plan is for " + std::to_string(plan.n) + " patches, sequence has " + std::to_string(n));
  for (auto i : plan.masked) require(i < n, ErrorKind::ShapeError, "mask index out of range");
}

std::vector<double> sorted_log_eigs(const Matrix& log_a) {
  return sym_eig(SymmetricMatrix(log_a)).values;  // descending
}

}  // namespace

std::vector<SpdMatrix> apply_mask(const std::vector<SpdMatrix>& seq, const MaskPlan& plan,
                                  const SpdMatrix& m) {
  check_plan(plan, seq.size());
  std::vector<SpdMatrix> out = seq;
  for (auto i : plan.masked) {
    require(m.dim() == seq[i].dim(), ErrorKind::ShapeError, "mask dimension");
    out[i] = m;
  }
  return out;
}

std::vector<Matrix> apply_mask_logs(const std::vector<Matrix>& logs, const MaskPlan& plan,
                                    const Matrix& log_m) {
  check_plan(plan, logs.size());
  std::vector<Matrix> out = logs;
  for (auto i : plan.masked) out[i] = log_m;
  return out;
}

double mae_loss(const std::vector<SpdMatrix>& original, const std::vector<SpdMatrix>& predicted,
                const MaskPlan& plan) {
  require(original.size() == predicted.size(), ErrorKind::ShapeError, "mae_loss misaligned");
  check_plan(plan, original.size());
  if (plan.masked.empty()) return 0.0;
  double total = 0.0;
  for (auto i : plan.masked) {
    const auto& a = original[i].eigen().values;
    const auto& b = predicted[i].eigen().values;
    require(a.size() == b.size(), ErrorKind::ShapeError, "mae_loss dimension mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = std::log(a[k]) - std::log(b[k]);
      total += d * d;
    }
  }
  return total / static_cast<double>(plan.masked.size());
}

double mae_loss_logs(const std::vector<Matrix>& original, const std::vector<Matrix>& predicted,
                     const MaskPlan& plan, std::vector<Matrix>* grads) {
  require(original.size() == predicted.size(), ErrorKind::ShapeError, "mae_loss misaligned");
  check_plan(plan, original.size());
  if (grads) {
    grads->clear();
    for (const auto& p : predicted) grads->emplace_back(p.rows(), p.cols());
  }
  if (plan.masked.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(plan.masked.size());
  double total = 0.0;
  for (auto i : plan.masked) {
    const auto a = sorted_log_eigs(original[i]);
    const auto eb = sym_eig(SymmetricMatrix(predicted[i]));
    require(a.size() == eb.values.size(), ErrorKind::ShapeError, "mae_loss dimension mismatch");
    std::vector<double> g(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = eb.values[k] - a[k];
      total += d * d;
      g[k] = 2.0 * d * inv;
    }
    // d lambda_k / dS = u_k u_k^T
    if (grads) (*grads)[i] = symmetrized(congruence_diag(eb.vectors, g));
  }
  return total * inv;
}

std::vector<std::vector<std::size_t>> sample_negatives(std::size_t n, std::size_t n_neg, Rng& rng) {
  require(n >= n_neg + 1, ErrorKind::InsufficientNegatives,
          std::to_string(n) + " patches cannot supply " + std::to_string(n_neg) +
              " negatives per anchor");
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto pick = rng.sample_without_replacement(n - 1, n_neg);
    for (auto& q : pick)
      if (q >= p) ++q;
    out[p] = std::move(pick);
  }
  return out;
}

namespace {

double sim_grad(double d) {
  const double a = 1.0 + std::log1p(d);
  return -1.0 / (a * a * (1.0 + d));
}

}  // namespace

double loo_loss(const std::vector<std::vector<Matrix>>& logs,
                const std::vector<std::vector<std::size_t>>& negatives, double tau,
                LooGrads* grads) {
  const std::size_t nb = logs.size();
  require(nb >= 2, ErrorKind::InvalidInput, "loo_loss needs at least two bands");
  const std::size_t n = logs.front().size();
  for (const auto& b : logs) require(b.size() == n, ErrorKind::ShapeError, "bands disagree on patch count");
  require(negatives.size() == n, ErrorKind::ShapeError, "one negative list per anchor required");
  const std::size_t n_neg = negatives.front().size();
  require(n >= n_neg + 1, ErrorKind::InsufficientNegatives, "too few patches for the negatives");

  // Sum over bands per patch; the mean of the others is (sum - own) / (B - 1).
  std::vector<Matrix> sum(n);
  for (std::size_t p = 0; p < n; ++p) {
    sum[p] = logs[0][p];
    for (std::size_t b = 1; b < nb; ++b) sum[p] += logs[b][p];
  }
  const double inv_others = 1.0 / static_cast<double>(nb - 1);
  const double scale = std::exp(tau);
  const double inv_count = 1.0 / static_cast<double>(nb * n);

  if (grads) {
    grads->logs.assign(nb, {});
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t p = 0; p < n; ++p) grads->logs[b].emplace_back(logs[b][p].rows(), logs[b][p].cols());
    grads->tau = 0.0;
  }
  // Gradient w.r.t. the other-band mean at (b, q), scattered afterwards.
  std::vector<std::vector<Matrix>> g_mean;
  if (grads) g_mean = grads->logs;

  double total = 0.0;
  std::vector<std::size_t> cand(n_neg + 1);
  std::vector<double> dist(n_neg + 1), logits(n_neg + 1);
  std::vector<Matrix> diffs(n_neg + 1);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t p = 0; p < n; ++p) {
      require(negatives[p].size() == n_neg, ErrorKind::ShapeError, "ragged negatives");
      cand[0] = p;
      std::copy(negatives[p].begin(), negatives[p].end(), cand.begin() + 1);
      double mx = -1e300;
      for (std::size_t c = 0; c < cand.size(); ++c) {
        Matrix mean = sum[cand[c]] - logs[b][cand[c]];
        mean *= inv_others;
        diffs[c] = logs[b][p] - mean;
        dist[c] = frobenius_norm(diffs[c]);
        logits[c] = sim_from_distance(dist[c]) * scale;
        mx = std::max(mx, logits[c]);
      }
      double z = 0.0;
      for (double l : logits) z += std::exp(l - mx);
      total += -(logits[0] - mx - std::log(z));
      if (!grads) continue;
      for (std::size_t c = 0; c < cand.size(); ++c) {
        const double prob = std::exp(logits[c] - mx) / z;
        const double gl = (prob - (c == 0 ? 1.0 : 0.0)) * inv_count;
        grads->tau += gl * logits[c];
        if (dist[c] <= 0.0) continue;
        const double gd = gl * scale * sim_grad(dist[c]) / dist[c];
        Matrix g = diffs[c] * gd;
        grads->logs[b][p] += g;
        g_mean[b][cand[c]] -= g;
      }
    }
  if (grads)
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t q = 0; q < n; ++q) {
        if (max_abs(g_mean[b][q]) == 0.0) continue;
        const Matrix g = g_mean[b][q] * inv_others;
        for (std::size_t b2 = 0; b2 < nb; ++b2)
          if (b2 != b) grads->logs[b2][q] += g;
      }
  return total * inv_count;
}

double loo_loss(const std::vector<std::vector<SpdMatrix>>& band_embeds, std::size_t n_neg,
                double tau, Rng& rng) {
  require(band_embeds.size() >= 2, ErrorKind::InvalidInput, "loo_loss needs at least two bands");
  std::vector<std::vector<Matrix>> logs;
  for (const auto& b : band_embeds) {
    logs.emplace_back();
    for (const auto& a : b) logs.back().push_back(spd_log(a).matrix());
  }
  const auto neg = sample_negatives(logs.front().size(), n_neg, rng);
  return loo_loss(logs, neg, tau);
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::autoencoder: return "autoencoder";
    case Stage::wavelet: return "wavelet";
    case Stage::combined: return "combined";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  if (s == "autoencoder") return Stage::autoencoder;
  if (s == "wavelet" || s == "wavelet_contextualizer") return Stage::wavelet;
  if (s == "combined" || s == "combined_contextualizer") return Stage::combined;
  fail(ErrorKind::InvalidInput, "unknown stage '" + std::string(s) + "'");
}

double StagePlan::lr_at(std::size_t step) const {
  const std::size_t total = total_steps();
  if (total <= 1) return lr;
  return cosine_lr(lr, eta_min, std::min(step, total - 1), total - 1);
}

StagePlan pretrain_schedule(Stage stage, std::size_t steps_per_epoch) {
  StagePlan p;
  p.stage = stage;
  p.steps_per_epoch = std::max<std::size_t>(steps_per_epoch, 1);
  if (stage == Stage::autoencoder) {
    p.lr = 1e-4;
    p.epochs = 30;
  } else {
    p.lr = 1e-3;
    p.epochs = 5;
  }
  return p;
}

StagePlan pretrain_schedule(std::string_view stage, std::size_t steps_per_epoch) {
  return pretrain_schedule(stage_from_string(stage), steps_per_epoch);
}

}  // namespace mendr::ssl
