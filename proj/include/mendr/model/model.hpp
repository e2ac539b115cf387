#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mendr/autodiff/params.hpp"
#include "mendr/model/autoencoder.hpp"
#include "mendr/model/config.hpp"
#include "mendr/model/contextualizer.hpp"
#include "mendr/wavelet/wavelet.hpp"

namespace mendr::model {

// Every learnable piece of the network, registered in a fixed order so that
// a seed and a config determine the parameter vector.
//   enc.<band>.*   harmonizer + convolution stack
//   dec.<band>.*   decoder and subject latents
//   ctx.<band>.*   MLP and ACPE
//   ctx.reduce     BiMap 19 -> d (large)
//   ctx.wave.<band>.*  wavelet transformers (large)
//   ctx.comb.*     combined transformer
//   ctx.mask       Cholesky factor of the MAE mask
//   ctx.tau        LOO temperature
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::uint64_t seed() const noexcept { return seed_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  const BandEncoder& encoder(wavelet::Band b) const { return *encoders_.at(b); }
  const BandDecoder& decoder(wavelet::Band b) const { return *decoders_.at(b); }
  const SubjectTable& subjects() const noexcept { return subjects_; }
  const BandFrontend& frontend(wavelet::Band b) const { return *frontends_.at(b); }
  const ManifoldTransformer& wavelet_transformer(wavelet::Band b) const { return *wavelet_.at(b); }
  const ManifoldTransformer& combined_transformer() const { return *combined_; }
  Parameter* reduce() const noexcept { return reduce_; }
  Parameter& mask() const noexcept { return *mask_; }
  Parameter& tau() const noexcept { return *tau_; }

  // Completed stages, in order.
  std::vector<std::string>& stages() noexcept { return stages_; }
  const std::vector<std::string>& stages() const noexcept { return stages_; }

  // Marks exactly the parameters trained by a stage as trainable.
  void freeze_for_stage(std::string_view stage);

 private:
  ModelConfig cfg_;
  std::uint64_t seed_;
  ParameterSet params_;
  std::map<wavelet::Band, std::unique_ptr<BandEncoder>> encoders_;
  std::map<wavelet::Band, std::unique_ptr<BandDecoder>> decoders_;
  SubjectTable subjects_;
  std::map<wavelet::Band, std::unique_ptr<BandFrontend>> frontends_;
  Parameter* reduce_ = nullptr;
  std::map<wavelet::Band, std::unique_ptr<ManifoldTransformer>> wavelet_;
  std::unique_ptr<ManifoldTransformer> combined_;
  Parameter* mask_ = nullptr;
  Parameter* tau_ = nullptr;
  std::vector<std::string> stages_;
};

// Embeddings of one segment in eval mode (no channel dropout).
struct SegmentEmbedding {
  std::map<wavelet::Band, Matrix> features;            // encoder output
  std::map<wavelet::Band, std::vector<Matrix>> bands;  // per-band logs entering the combination
  std::vector<Matrix> combined_in;                     // mean of band logs
  std::vector<Matrix> combined;                        // combined transformer output (logs)
};

SegmentEmbedding embed(const Model& m, const wavelet::BandDecomposition& bd,
                       const std::vector<double>& mask, const SpdProbe* probe = nullptr);

// Encoder features only, per band.
std::map<wavelet::Band, Matrix> encode_bands(const Model& m, const wavelet::BandDecomposition& bd,
                                             const std::vector<double>& mask);
// Per-band logs entering the combination given encoder features.
std::map<wavelet::Band, std::vector<Matrix>> contextualize_bands(
    const Model& m, const std::map<wavelet::Band, Matrix>& features, const SpdProbe* probe = nullptr);

// Cholesky mask M = L L^T and its logarithm.
struct MaskEmbedding {
  Matrix m;
  EigenDecomposition eig;
  Matrix log_m;
};
MaskEmbedding mask_embedding(const Model& m);

// Binary container: 8-byte magic, u64 header length, JSON header (config,
// seed, stages, parameter manifest), then little-endian f64 blobs.
void save_checkpoint(const Model& m, const std::filesystem::path& p);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& p);
// Header only.
nlohmann::json read_checkpoint_header(const std::filesystem::path& p);

}  // namespace mendr::model
