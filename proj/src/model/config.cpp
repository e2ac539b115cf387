#include "mendr/model/config.hpp"

#include <set>

#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"

namespace mendr::model {

std::string_view to_string(ContextKind k) noexcept { return k == ContextKind::tiny ? "tiny" : "large"; }

ContextKind context_kind_from_string(std::string_view s) {
  if (s == "tiny") return ContextKind::tiny;
  if (s == "large") return ContextKind::large;
  fail(ErrorKind::ConfigError, "model kind must be tiny or large, got '" + std::string(s) + "'");
}

EncoderConfig encoder_config(wavelet::Band b) {
  using wavelet::Band;
  EncoderConfig c;
  c.band = b;
  c.patch_length = wavelet::patch_length(b);
  switch (b) {
    case Band::delta:
    case Band::theta: c.strides = {1, 1, 1}; break;
    case Band::alpha:
    case Band::beta: c.strides = {2, 1, 1}; break;
    case Band::gamma: c.strides = {2, 2, 1}; break;
    case Band::high: c.strides = {2, 2, 2}; break;
  }
  c.t_hidden = c.patch_length / (c.strides[0] * c.strides[1] * c.strides[2]);
  return c;
}

std::size_t ModelConfig::embed_dim() const {
  return kind == ContextKind::tiny ? graph::kNumChannels : reduced_dim;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"kind", std::string(to_string(kind))},
          {"include_high", include_high},
          {"tiny_layers", tiny_layers},
          {"wavelet_layers", wavelet_layers},
          {"combined_layers", combined_layers},
          {"reduced_dim", reduced_dim},
          {"tau_init", tau_init},
          {"n_negatives", n_negatives},
          {"mask_ratio", mask_ratio},
          {"channel_dropout", channel_dropout},
          {"subjects", subjects}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::ConfigError, "model config must be an object");
  static const std::set<std::string> known{"kind",        "include_high",    "tiny_layers",
                                           "wavelet_layers", "combined_layers", "reduced_dim",
                                           "tau_init",    "n_negatives",     "mask_ratio",
                                           "channel_dropout", "subjects"};
  for (const auto& [k, v] : j.items())
    require(known.count(k) != 0, ErrorKind::ConfigError, "unknown model config key '" + k + "'");
  ModelConfig c;
  try {
    if (j.contains("kind")) c.kind = context_kind_from_string(j["kind"].get<std::string>());
    c.include_high = j.value("include_high", c.include_high);
    c.tiny_layers = j.value("tiny_layers", c.tiny_layers);
    c.wavelet_layers = j.value("wavelet_layers", c.wavelet_layers);
    c.combined_layers = j.value("combined_layers", c.combined_layers);
    c.reduced_dim = j.value("reduced_dim", c.reduced_dim);
    c.tau_init = j.value("tau_init", c.tau_init);
    c.n_negatives = j.value("n_negatives", c.n_negatives);
    c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
    c.channel_dropout = j.value("channel_dropout", c.channel_dropout);
    c.subjects = j.value("subjects", c.subjects);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("model config: ") + e.what());
  }
  require(c.reduced_dim >= 1 && c.reduced_dim <= graph::kNumChannels, ErrorKind::ConfigError,
          "reduced_dim must be in [1, 19]");
  require(c.n_negatives >= 1, ErrorKind::ConfigError, "n_negatives must be at least 1");
  require(c.mask_ratio >= 0.0 && c.mask_ratio < 1.0, ErrorKind::ConfigError,
          "mask_ratio must be in [0, 1)");
  require(c.channel_dropout >= 0.0 && c.channel_dropout < 1.0, ErrorKind::ConfigError,
          "channel_dropout must be in [0, 1)");
  return c;
}

}  // namespace mendr::model
