#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "mendr/wavelet/wavelet.hpp"

namespace mendr::model {

enum class ContextKind { tiny, large };

std::string_view to_string(ContextKind k) noexcept;
ContextKind context_kind_from_string(std::string_view s);

// Per-band convolution stack: three blocks with kernel == stride.
struct EncoderConfig {
  wavelet::Band band = wavelet::Band::delta;
  std::size_t patch_length = 8;  // coefficients per patch
  std::size_t t_hidden = 8;
  std::array<std::size_t, 3> strides{1, 1, 1};
  std::size_t conv_channels = 8;
  std::size_t groups = 2;
};

// delta/theta (1,1,1) -> 8, alpha (2,1,1) -> 8, beta (2,1,1) -> 16,
// gamma (2,2,1) -> 16, high (2,2,2) -> 16.
EncoderConfig encoder_config(wavelet::Band b);

struct ModelConfig {
  ContextKind kind = ContextKind::tiny;
  bool include_high = false;
  std::size_t tiny_layers = 6;
  std::size_t wavelet_layers = 6;
  std::size_t combined_layers = 8;
  std::size_t reduced_dim = 6;
  double tau_init = 1.0;
  std::size_t n_negatives = 32;
  double mask_ratio = 0.2;
  double channel_dropout = 0.1;
  std::vector<std::string> subjects;

  std::vector<wavelet::Band> bands() const { return wavelet::bands_for(include_high); }
  // Matrix size inside the contextualizer transformers.
  std::size_t embed_dim() const;

  nlohmann::json to_json() const;
  // Rejects unknown keys with ConfigError.
  static ModelConfig from_json(const nlohmann::json& j);
};

}  // namespace mendr::model
