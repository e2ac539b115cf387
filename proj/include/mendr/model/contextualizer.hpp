#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mendr/autodiff/params.hpp"
#include "mendr/model/config.hpp"
#include "mendr/model/nn.hpp"
#include "mendr/rng.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr::model {

// Position-wise two-layer map over the t_hidden axis, applied to every
// (channel, patch) row independently. No residual.
class PatchMlp {
 public:
  PatchMlp(const std::string& prefix, std::size_t t_hidden, ParameterSet& ps, Rng& rng);

  struct Cache {
    Matrix x, pre;
  };
  // s: channels x (n * t_hidden)
  Matrix forward(const Matrix& s, Cache* cache = nullptr) const;
  Matrix backward(const Cache& cache, const Matrix& grad) const;

 private:
  std::size_t th_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
};

// S + conv(S) with a zero-padded kernel spanning 3 patches and 19 channel
// offsets, one kernel per t_hidden position. Zero-initialized.
class Acpe {
 public:
  Acpe(const std::string& prefix, std::size_t t_hidden, ParameterSet& ps);

  Matrix forward(const Matrix& s) const;
  Matrix backward(const Matrix& s, const Matrix& grad) const;
  Parameter& kernel() const { return *k_; }

 private:
  std::size_t th_;
  Parameter* k_;  // t_hidden x (3 * 19)
};

// Per patch: trace_norm(X X^T / (t - 1) + eps I) of the channels x t block.
std::vector<Matrix> to_spd_sequence(const Matrix& s, std::size_t t_hidden);
// grads: one per patch; returns the gradient w.r.t. s.
Matrix to_spd_backward(const Matrix& s, std::size_t t_hidden, const std::vector<Matrix>& grads);

// Called with a point name and the smallest eigenvalue there.
using SpdProbe = std::function<void(const std::string& point, double min_eig)>;

// Manifold transformer layers carried on matrix logarithms. With square
// orthogonal W, log(W A W^T) = W log(A) W^T, so each layer is
//   P, K, V = W. L W.^T; w = softmax_j sim(||P_i - K_j||)
//   Y = tracenorm(exp(L_i + sum_j w_ij V_j))         (attention + residual)
//   Z = tracenorm(exp(log Y + Wf log Y Wf^T))          (BiMap + residual)
// and the layer returns log Z.
class ManifoldTransformer {
 public:
  ManifoldTransformer(const std::string& prefix, std::size_t dim, std::size_t layers,
                      ParameterSet& ps, Rng& rng);

  struct LayerCache {
    std::vector<Matrix> in, p, k, v;
    Matrix dist, attn;
    std::vector<EigenDecomposition> g_eig, y_eig, g2_eig, z_eig;
    std::vector<Matrix> logy;
  };
  struct Cache {
    std::vector<LayerCache> layers;
  };

  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return wq_.size(); }

  std::vector<Matrix> forward(const std::vector<Matrix>& logs, Cache* cache = nullptr,
                              const SpdProbe* probe = nullptr) const;
  std::vector<Matrix> backward(const Cache& cache, const std::vector<Matrix>& grads) const;
  // Attention weights of one layer for the given input sequence.
  Matrix attention(const std::vector<Matrix>& logs, std::size_t layer) const;

 private:
  std::vector<Matrix> layer_forward(std::size_t l, const std::vector<Matrix>& in, LayerCache& c,
                                    const SpdProbe* probe) const;
  std::vector<Matrix> layer_backward(std::size_t l, const LayerCache& c,
                                     const std::vector<Matrix>& grads) const;

  std::size_t dim_;
  std::vector<Parameter*> wq_, wk_, wv_, wf_;
};

// Per-band path from encoder features to the transformer input: MLP, ACPE,
// SCM with trace normalization, optional BiMap reduction, then the log.
class BandFrontend {
 public:
  BandFrontend(const std::string& prefix, std::size_t t_hidden, ParameterSet& ps, Rng& rng);

  struct Cache {
    PatchMlp::Cache mlp;
    Matrix x, s;
    std::vector<Matrix> y;
    std::vector<EigenDecomposition> eig;  // of the matrix whose log is returned
  };

  // reduce is the BiMap weight (d x 19) or nullptr for the 19 x 19 path.
  std::vector<Matrix> forward(const Matrix& features, const Parameter* reduce, Cache* cache = nullptr,
                              const SpdProbe* probe = nullptr) const;
  void backward(const Cache& cache, Parameter* reduce, const std::vector<Matrix>& grads) const;

  const PatchMlp& mlp() const noexcept { return mlp_; }
  const Acpe& acpe() const noexcept { return acpe_; }

 private:
  std::size_t th_;
  PatchMlp mlp_;
  Acpe acpe_;
};

// Elementwise mean of per-band log sequences.
std::vector<Matrix> combine_band_logs(const std::vector<std::vector<Matrix>>& per_band);

// U diag(log lambda) U^T for a symmetric positive decomposition.
Matrix log_from_eig(const EigenDecomposition& e);

}  // namespace mendr::model
