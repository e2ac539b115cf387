#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mendr/autodiff/params.hpp"
#include "mendr/graph/harmonizer.hpp"
#include "mendr/linalg/tensor.hpp"
#include "mendr/model/config.hpp"
#include "mendr/model/nn.hpp"

namespace mendr::model {

struct ConvBlockCache {
  Tensor3 in;
  Tensor3 pre;  // after group norm, before GELU
  nn::GroupNormCache gn;
};

// harmonizer -> squeeze-excitation -> 3 x (conv, group norm, GELU), applied
// per patch. Output is channels x (n * t_hidden).
class BandEncoder {
 public:
  BandEncoder(const EncoderConfig& cfg, const std::string& prefix, ParameterSet& ps, Rng& rng);

  struct Cache {
    graph::HarmonizerCache harmonizer;
    std::vector<std::array<ConvBlockCache, 3>> patches;
  };

  const EncoderConfig& config() const noexcept { return cfg_; }
  Matrix forward(const Matrix& coeffs, const std::vector<double>& mask, Cache* cache = nullptr) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. coeffs.
  Matrix backward(const Cache& cache, const Matrix& grad) const;

  // The convolution stack alone on one harmonized patch (channels x T).
  Matrix conv_forward(const Matrix& patch, std::array<ConvBlockCache, 3>* cache = nullptr) const;

 private:
  Matrix conv_backward(const std::array<ConvBlockCache, 3>& cache, const Matrix& grad) const;

  EncoderConfig cfg_;
  graph::Harmonizer harmonizer_;
  std::array<Parameter*, 3> conv_;
  std::array<Parameter*, 3> gn_g_;
  std::array<Parameter*, 3> gn_b_;
};

// Learnable additive latent per (subject, band); unknown subjects map to
// zero.
class SubjectTable {
 public:
  SubjectTable() = default;
  SubjectTable(const std::vector<std::string>& subjects, const std::vector<wavelet::Band>& bands,
               ParameterSet& ps);

  // nullptr for an unknown subject.
  Parameter* latent(const std::string& subject, wavelet::Band b) const;
  std::size_t size() const noexcept { return n_subjects_; }

 private:
  std::map<std::pair<std::string, wavelet::Band>, Parameter*> table_;
  std::size_t n_subjects_ = 0;
};

// (z + subject latent) -> ConvT blocks with group norm and GELU -> ConvT ->
// squeeze-excitation -> linear map over each patch's coefficients.
class BandDecoder {
 public:
  BandDecoder(const EncoderConfig& cfg, const std::string& prefix, ParameterSet& ps, Rng& rng);

  struct PatchCache {
    Tensor3 in0, pre0, in1, pre1, in2;
    nn::GroupNormCache gn0, gn1;
    graph::SeCache se;
    Matrix gated;
  };
  struct Cache {
    std::vector<PatchCache> patches;
    bool has_latent = false;
  };

  // z: channels x (n * t_hidden); latent: channels x t_hidden or nullptr.
  Matrix forward(const Matrix& z, const Matrix* latent, Cache* cache = nullptr) const;
  // Returns dL/dz; adds dL/dlatent into *grad_latent when given.
  Matrix backward(const Cache& cache, const Matrix& grad, Matrix* grad_latent) const;

 private:
  EncoderConfig cfg_;
  std::array<Parameter*, 3> convt_;
  std::array<Parameter*, 2> gn_g_;
  std::array<Parameter*, 2> gn_b_;
  graph::SqueezeExcitation se_;
  Parameter* lin_w_;
  Parameter* lin_b_;
};

// Columns [p * w, (p + 1) * w) of m.
Matrix patch_slice(const Matrix& m, std::size_t p, std::size_t w);
void set_patch_slice(Matrix& m, std::size_t p, const Matrix& block);

}  // namespace mendr::model
