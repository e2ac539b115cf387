#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mendr/autodiff/params.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/linalg/matrix.hpp"
#include "mendr/model/nn.hpp"
#include "mendr/rng.hpp"

namespace mendr::graph {

inline constexpr std::size_t kHarmonizerBlocks = 3;
inline constexpr std::size_t kFfnDim = 32;

// One graph-attention transformer block over the electrodes. Node features
// are the t coefficients of a patch plus the presence flag (F = t + 1).
//   Z = H Wz, V = diag(m) Z in the first block
//   A = softmax_j(leaky(Z_i a_src + Z_j a_dst) - exp(rho) D_ij)
//   H' = H + diag(g) (A V) Wo, g_c = sigmoid(gate0 m_c + gate1)
//   out = H' + gelu(LN(H' W1 + b1)) W2 + b2
// The first block starts as an imputer (Wz = Wo = I, gate open only on
// missing channels); later blocks start as identities.
struct GatBlock {
  Parameter* wz;     // F x F
  Parameter* a_src;  // F x 1
  Parameter* a_dst;  // F x 1
  Parameter* rho;    // 1 x 1
  Parameter* wo;     // F x F
  Parameter* gate;   // 1 x 2
  Parameter* w1;     // F x 32
  Parameter* b1;
  Parameter* ln_g;
  Parameter* ln_b;
  Parameter* w2;  // 32 x F, zero init
  Parameter* b2;
};

// Channel gate with reduction 1: z = sigmoid(relu(s W1 + b1) W2 + b2), s the
// per-channel mean over time.
struct SqueezeExcitation {
  Parameter* w1;  // C x C
  Parameter* b1;
  Parameter* w2;  // C x C, zero init
  Parameter* b2;
};

struct SeCache {
  Matrix x;
  Matrix s, pre, h, z;  // rows of length C
};

SqueezeExcitation make_se(const std::string& prefix, std::size_t channels, ParameterSet& ps,
                          Rng& rng);
// x is C x T; returns x with row c scaled by z_c.
Matrix se_forward(const SqueezeExcitation& se, const Matrix& x, SeCache* cache = nullptr);
Matrix se_backward(const SqueezeExcitation& se, const SeCache& cache, const Matrix& gy);

struct GatBlockCache {
  Matrix h_in, z, v, raw, attn, o, u;
  std::vector<double> g;
  Matrix h_mid, q;
  nn::LayerNormCache ln;
};

struct HarmonizerPatchCache {
  std::array<GatBlockCache, kHarmonizerBlocks> blocks;
  SeCache se;
};

struct HarmonizerCache {
  std::vector<HarmonizerPatchCache> patches;
  std::vector<double> mask;
};

// Spatial harmonizer for one band with per-patch length t.
class Harmonizer {
 public:
  Harmonizer(const std::string& prefix, std::size_t t, ParameterSet& ps, Rng& rng);

  std::size_t patch_length() const noexcept { return t_; }

  // coeffs: C x (n * t); mask: C presence flags; dist: C x C normalized.
  Matrix forward(const Matrix& coeffs, const std::vector<double>& mask, const Matrix& dist,
                 HarmonizerCache* cache = nullptr) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. coeffs.
  Matrix backward(const HarmonizerCache& cache, const Matrix& dist, const Matrix& gy) const;

  // The three blocks alone on one patch, C x t in and out (no gate).
  Matrix blocks_forward(const Matrix& patch, const std::vector<double>& mask,
                        const Matrix& dist) const;
  // Attention weights of block k for one patch, rows sum to one.
  Matrix attention(const Matrix& patch, const std::vector<double>& mask, const Matrix& dist,
                   std::size_t block) const;

  const SqueezeExcitation& se() const noexcept { return se_; }

 private:
  Matrix block_forward(std::size_t k, const Matrix& h, const std::vector<double>& mask,
                       const Matrix& dist, GatBlockCache& c) const;
  Matrix block_backward(std::size_t k, const GatBlockCache& c, const std::vector<double>& mask,
                        const Matrix& dist, const Matrix& gy) const;
  Matrix patch_forward(const Matrix& patch, const std::vector<double>& mask, const Matrix& dist,
                       HarmonizerPatchCache& c) const;

  std::size_t t_;
  std::array<GatBlock, kHarmonizerBlocks> blocks_;
  SqueezeExcitation se_;
};

struct ImputationConfig {
  std::size_t steps = 200;
  double lr = 3e-3;
  double p_drop = 0.2;
  std::uint64_t seed = 0;
};

struct ImputationReport {
  std::vector<double> train_loss;
  double heldout_mse = 0.0;   // on dropped channels
  double baseline_mse = 0.0;  // zero imputation on the same channels
};

// Trains a standalone harmonizer to restore clean coefficients of one band
// under channel dropout, then scores it on held-out segments.
ImputationReport train_imputation(const std::vector<Matrix>& train, const std::vector<Matrix>& test,
                                  std::size_t t, const ImputationConfig& cfg);

}  // namespace mendr::graph
