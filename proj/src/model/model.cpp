#include "mendr/model/model.hpp"

#include <cstring>
#include <fstream>

#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"

namespace mendr::model {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'N', 'D', 'R', 'C', 'K', '1'};

std::string band_prefix(std::string_view root, wavelet::Band b) {
  return std::string(root) + "." + std::string(wavelet::name(b));
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  const Rng root(seed);
  const auto bands = cfg_.bands();
  for (auto b : bands) {
    Rng r = root.fork(band_prefix("enc", b));
    encoders_[b] = std::make_unique<BandEncoder>(encoder_config(b), band_prefix("enc", b), params_, r);
  }
  for (auto b : bands) {
    Rng r = root.fork(band_prefix("dec", b));
    decoders_[b] = std::make_unique<BandDecoder>(encoder_config(b), band_prefix("dec", b), params_, r);
  }
  subjects_ = SubjectTable(cfg_.subjects, bands, params_);
  for (auto b : bands) {
    Rng r = root.fork(band_prefix("ctx", b));
    frontends_[b] = std::make_unique<BandFrontend>(band_prefix("ctx", b), encoder_config(b).t_hidden,
                                                   params_, r);
  }
  const std::size_t d = cfg_.embed_dim();
  if (cfg_.kind == ContextKind::large) {
    Rng r = root.fork("ctx.reduce");
    reduce_ = &params_.add("ctx.reduce", ParamGroup::stiefel, stiefel_init(d, graph::kNumChannels, r));
    for (auto b : bands) {
      Rng rb = root.fork(band_prefix("ctx.wave", b));
      wavelet_[b] = std::make_unique<ManifoldTransformer>(band_prefix("ctx.wave", b), d,
                                                          cfg_.wavelet_layers, params_, rb);
    }
  }
  Rng rc = root.fork("ctx.comb");
  combined_ = std::make_unique<ManifoldTransformer>(
      "ctx.comb", d, cfg_.kind == ContextKind::tiny ? cfg_.tiny_layers : cfg_.combined_layers, params_, rc);
  Rng rm = root.fork("ctx.mask");
  Matrix l = Matrix::identity(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) l(i, j) = 0.5 * (l(i, j) + 0.1 * rm.normal());
  mask_ = &params_.add("ctx.mask", ParamGroup::cholesky, std::move(l));
  Matrix tau(1, 1);
  tau(0, 0) = cfg_.tau_init;
  tau_ = &params_.add("ctx.tau", ParamGroup::euclidean, std::move(tau));
}

void Model::freeze_for_stage(std::string_view stage) {
  params_.set_all_trainable(false);
  if (stage == "autoencoder") {
    params_.set_trainable("enc.", true);
    params_.set_trainable("dec.", true);
    return;
  }
  const auto bands = cfg_.bands();
  if (stage == "wavelet") {
    require(cfg_.kind == ContextKind::large, ErrorKind::ConfigError,
            "the tiny model has no wavelet contextualizer");
    for (auto b : bands) params_.set_trainable(band_prefix("ctx", b) + ".", true);
    params_.set_trainable("ctx.reduce", true);
    params_.set_trainable("ctx.wave.", true);
    params_.set_trainable("ctx.tau", true);
    return;
  }
  if (stage == "combined") {
    params_.set_trainable("ctx.comb.", true);
    params_.set_trainable("ctx.mask", true);
    if (cfg_.kind == ContextKind::tiny)
      for (auto b : bands) params_.set_trainable(band_prefix("ctx", b) + ".", true);
    return;
  }
  fail(ErrorKind::InvalidInput, "unknown stage '" + std::string(stage) + "'");
}

std::map<wavelet::Band, Matrix> encode_bands(const Model& m, const wavelet::BandDecomposition& bd,
                                             const std::vector<double>& mask) {
  std::map<wavelet::Band, Matrix> out;
  for (auto b : m.config().bands()) {
    require(bd.has(b), ErrorKind::IncompleteDecomposition,
            "decomposition lacks band " + std::string(wavelet::name(b)));
    out[b] = m.encoder(b).forward(bd.at(b), mask);
  }
  return out;
}

std::map<wavelet::Band, std::vector<Matrix>> contextualize_bands(
    const Model& m, const std::map<wavelet::Band, Matrix>& features, const SpdProbe* probe) {
  std::map<wavelet::Band, std::vector<Matrix>> out;
  for (auto b : m.config().bands()) {
    SpdProbe band_probe;
    if (probe)
      band_probe = [&, b](const std::string& point, double v) {
        (*probe)(std::string(wavelet::name(b)) + "." + point, v);
      };
    const SpdProbe* bp = probe ? &band_probe : nullptr;
    auto logs = m.frontend(b).forward(features.at(b), m.reduce(), nullptr, bp);
    if (m.config().kind == ContextKind::large) {
      SpdProbe wp;
      if (probe)
        wp = [&, b](const std::string& point, double v) {
          (*probe)(std::string(wavelet::name(b)) + ".wave." + point, v);
        };
      logs = m.wavelet_transformer(b).forward(logs, nullptr, probe ? &wp : nullptr);
    }
    out[b] = std::move(logs);
  }
  return out;
}

SegmentEmbedding embed(const Model& m, const wavelet::BandDecomposition& bd,
                       const std::vector<double>& mask, const SpdProbe* probe) {
  SegmentEmbedding e;
  e.features = encode_bands(m, bd, mask);
  e.bands = contextualize_bands(m, e.features, probe);
  std::vector<std::vector<Matrix>> per_band;
  for (auto& [b, logs] : e.bands) per_band.push_back(logs);
  e.combined_in = combine_band_logs(per_band);
  if (probe)
    for (const auto& l : e.combined_in)
      (*probe)("combine", std::exp(sym_eig(SymmetricMatrix(l)).values.back()));
  SpdProbe cp;
  if (probe) cp = [&](const std::string& point, double v) { (*probe)("comb." + point, v); };
  e.combined = m.combined_transformer().forward(e.combined_in, nullptr, probe ? &cp : nullptr);
  return e;
}

MaskEmbedding mask_embedding(const Model& m) {
  MaskEmbedding me;
  me.m = cholesky_product(m.mask().value);
  me.eig = sym_eig(SymmetricMatrix(me.m));
  require(me.eig.values.back() > 0.0, ErrorKind::NotPositiveDefinite, "mask M lost positive definiteness");
  me.log_m = log_from_eig(me.eig);
  return me;
}

namespace {

// Header JSON and the byte offset of the first blob.
std::pair<nlohmann::json, std::streamoff> read_header(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open checkpoint " + p.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), 8);
  require(in && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::CorruptDataset,
          p.string() + " is not a checkpoint");
  require(len < (1u << 30), ErrorKind::CorruptDataset, "checkpoint header length");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  require(static_cast<bool>(in), ErrorKind::CorruptDataset, "truncated checkpoint header");
  try {
    return {nlohmann::json::parse(header), static_cast<std::streamoff>(16 + len)};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptDataset, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

nlohmann::json read_checkpoint_header(const std::filesystem::path& p) { return read_header(p).first; }

void save_checkpoint(const Model& m, const std::filesystem::path& p) {
  nlohmann::json h;
  h["format"] = "mendr-checkpoint";
  h["schema"] = 1;
  h["config"] = m.config().to_json();
  h["seed"] = m.seed();
  h["stages"] = m.stages();
  nlohmann::json manifest = nlohmann::json::array();
  const auto& ps = m.params();
  for (std::size_t i = 0; i < ps.size(); ++i)
    manifest.push_back({{"name", ps[i].name},
                        {"group", std::string(to_string(ps[i].group))},
                        {"rows", ps[i].value.rows()},
                        {"cols", ps[i].value.cols()}});
  h["params"] = manifest;
  const std::string header = h.dump();
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write checkpoint " + p.string());
  const std::uint64_t len = header.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header.data(), static_cast<std::streamsize>(len));
  for (std::size_t i = 0; i < ps.size(); ++i)
    out.write(reinterpret_cast<const char*>(ps[i].value.data()),
              static_cast<std::streamsize>(ps[i].value.size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorKind::IOError, "failed writing checkpoint " + p.string());
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& p) {
  const auto [h, offset] = read_header(p);
  require(h.value("format", "") == "mendr-checkpoint" && h.value("schema", 0) == 1,
          ErrorKind::CorruptDataset, "unsupported checkpoint format in " + p.string());
  auto m = std::make_unique<Model>(ModelConfig::from_json(h.at("config")), h.at("seed").get<std::uint64_t>());
  m->stages() = h.at("stages").get<std::vector<std::string>>();
  const auto& manifest = h.at("params");
  auto& ps = m->params();
  require(manifest.size() == ps.size(), ErrorKind::ConfigError,
          "checkpoint parameter count does not match its config");
  std::ifstream in(p, std::ios::binary);
  in.seekg(offset);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& e = manifest[i];
    require(e.at("name") == ps[i].name && e.at("rows") == ps[i].value.rows() &&
                e.at("cols") == ps[i].value.cols(),
            ErrorKind::ConfigError, "checkpoint parameter '" + e.at("name").get<std::string>() +
                                        "' does not match the model layout");
    in.read(reinterpret_cast<char*>(ps[i].value.data()),
            static_cast<std::streamsize>(ps[i].value.size() * sizeof(double)));
    require(static_cast<bool>(in), ErrorKind::CorruptDataset, "truncated checkpoint " + p.string());
  }
  in.peek();
  require(in.eof(), ErrorKind::CorruptDataset, "trailing bytes in checkpoint " + p.string());
  return m;
}

}  // namespace mendr::model
