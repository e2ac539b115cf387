#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "mendr/linalg/matrix.hpp"
#include "mendr/rng.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr::ssl {

// Mean of squared elementwise differences.
double recon_loss(const Matrix& x, const Matrix& x_recon);
// d recon_loss / d x_recon
Matrix recon_loss_grad(const Matrix& x, const Matrix& x_recon);

struct MaskPlan {
  std::size_t n = 0;
  std::vector<std::size_t> masked;  // sorted, unique
};

// floor(ratio * n) positions uniformly without replacement. Warns when the
// count is zero.
MaskPlan sample_mask(std::size_t n, Rng& rng, double ratio = 0.2);
// floor(ratio * n) computed without the binary rounding of ratio * n.
std::size_t mask_count(std::size_t n, double ratio);

// Masked positions replaced by m.
std::vector<SpdMatrix> apply_mask(const std::vector<SpdMatrix>& seq, const MaskPlan& plan,
                                  const SpdMatrix& m);
// Same on a sequence of logarithms.
std::vector<Matrix> apply_mask_logs(const std::vector<Matrix>& logs, const MaskPlan& plan,
                                    const Matrix& log_m);

// Mean over masked positions of ||log eig(A) - log eig(A_hat)||^2, both
// spectra descending.
double mae_loss(const std::vector<SpdMatrix>& original, const std::vector<SpdMatrix>& predicted,
                const MaskPlan& plan);
// Same on logarithms. When grads is given it receives dL/dlog(A_hat) for
// every position (zero at unmasked ones).
double mae_loss_logs(const std::vector<Matrix>& original, const std::vector<Matrix>& predicted,
                     const MaskPlan& plan, std::vector<Matrix>* grads = nullptr);

// For every anchor p, n_neg distinct other indices in [0, n).
std::vector<std::vector<std::size_t>> sample_negatives(std::size_t n, std::size_t n_neg, Rng& rng);

struct LooGrads {
  std::vector<std::vector<Matrix>> logs;  // [band][patch]
  double tau = 0.0;
};

// Leave-one-out contrastive loss. logs[b][p] is log A for band b at patch p.
// Anchor (b, p) is scored against the log-Euclidean mean of the other bands
// at p (positive) and at each negatives[p][k]; logits are
// sim(d_LEM) * exp(tau); the mean cross-entropy over all anchors is returned.
double loo_loss(const std::vector<std::vector<Matrix>>& logs,
                const std::vector<std::vector<std::size_t>>& negatives, double tau,
                LooGrads* grads = nullptr);
// SpdMatrix front end; negatives are drawn with rng.
double loo_loss(const std::vector<std::vector<SpdMatrix>>& band_embeds, std::size_t n_neg,
                double tau, Rng& rng);

enum class Stage { autoencoder, wavelet, combined };

std::string_view to_string(Stage s) noexcept;
Stage stage_from_string(std::string_view s);

struct StagePlan {
  Stage stage = Stage::autoencoder;
  double lr = 1e-4;
  double weight_decay = 0.001;
  double eta_min = 1e-7;
  double clip = 1e7;
  std::size_t epochs = 30;
  std::size_t steps_per_epoch = 1;

  std::size_t total_steps() const noexcept { return epochs * steps_per_epoch; }
  // Cosine annealing over the whole stage: lr at step 0, eta_min at the
  // last step.
  double lr_at(std::size_t step) const;
};

// Defaults: autoencoder 1e-4 for 30 epochs, contextualizers 1e-3 for 5.
StagePlan pretrain_schedule(Stage stage, std::size_t steps_per_epoch = 1);
StagePlan pretrain_schedule(std::string_view stage, std::size_t steps_per_epoch = 1);

}  // namespace mendr::ssl
