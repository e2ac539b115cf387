#include "mendr/ssl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/autodiff/spectral.hpp"
#include "mendr/data/dataset.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"
#include "mendr/io.hpp"
#include "mendr/log.hpp"

namespace mendr::ssl {

namespace fs = std::filesystem;
using nlohmann::json;
using wavelet::Band;

namespace {

std::map<Stage, double> stage_map(const json& j, const char* key) {
  require(j.is_object(), ErrorKind::ConfigError, std::string(key) + " must map stage names to numbers");
  std::map<Stage, double> out;
  for (const auto& [k, v] : j.items()) {
    Stage s;
    try {
      s = stage_from_string(k);
    } catch (const Error&) {
      fail(ErrorKind::ConfigError, std::string(key) + ": unknown stage " + k);
    }
    require(v.is_number() && v.get<double>() > 0, ErrorKind::ConfigError,
            std::string(key) + "." + k + " must be a positive number");
    out[s] = v.get<double>();
  }
  return out;
}

json stage_json(const auto& m) {
  json j = json::object();
  for (const auto& [s, v] : m) j[std::string(to_string(s))] = v;
  return j;
}

}  // namespace

json RunConfig::to_json() const {
  return {{"data", data.string()},
          {"out", out.string()},
          {"stage", stage},
          {"seed", seed},
          {"model", model.to_json()},
          {"batch_size", batch_size},
          {"epochs", stage_json(epochs)},
          {"lr", stage_json(lr)},
          {"weight_decay", weight_decay},
          {"eta_min", eta_min},
          {"clip", clip}};
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  require(j.is_object(), ErrorKind::ConfigError, "run config must be a JSON object");
  static const std::set<std::string> known{"data", "out",   "stage",        "seed",    "model", "batch_size",
                                           "epochs", "lr", "weight_decay", "eta_min", "clip"};
  for (const auto& [k, v] : j.items())
    require(known.count(k) != 0, ErrorKind::ConfigError, "unknown config key: " + k);
  RunConfig c;
  auto path = [&](const char* key) {
    require(j.contains(key) && j[key].is_string(), ErrorKind::ConfigError,
            std::string("config needs a string '") + key + "'");
    fs::path p = j[key].get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  try {
    c.data = path("data");
    c.out = path("out");
    c.stage = j.value("stage", c.stage);
    require(c.stage == "all" || c.stage == "autoencoder" || c.stage == "wavelet" || c.stage == "combined",
            ErrorKind::ConfigError, "stage must be autoencoder, wavelet, combined or all");
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = model::ModelConfig::from_json(j["model"]);
    c.batch_size = j.value("batch_size", c.batch_size);
    require(c.batch_size > 0, ErrorKind::ConfigError, "batch_size must be positive");
    if (j.contains("epochs"))
      for (const auto& [s, v] : stage_map(j["epochs"], "epochs")) {
        require(v == std::floor(v), ErrorKind::ConfigError, "epochs must be whole numbers");
        c.epochs[s] = static_cast<std::size_t>(v);
      }
    if (j.contains("lr")) c.lr = stage_map(j["lr"], "lr");
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.eta_min = j.value("eta_min", c.eta_min);
    c.clip = j.value("clip", c.clip);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_file(const fs::path& p) {
  json j;
  try {
    j = io::read_json(p);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IOError) throw;
    fail(ErrorKind::ConfigError, e.what());
  }
  return from_json(j, p.parent_path());
}

StagePlan RunConfig::plan(Stage s, std::size_t steps_per_epoch) const {
  StagePlan p = pretrain_schedule(s, steps_per_epoch);
  if (epochs.count(s)) p.epochs = epochs.at(s);
  if (lr.count(s)) p.lr = lr.at(s);
  p.weight_decay = weight_decay;
  p.eta_min = eta_min;
  p.clip = clip;
  return p;
}

std::optional<Stage> previous_stage(Stage s, model::ContextKind kind) {
  switch (s) {
    case Stage::autoencoder: return std::nullopt;
    case Stage::wavelet: return Stage::autoencoder;
    case Stage::combined:
      return kind == model::ContextKind::large ? Stage::wavelet : Stage::autoencoder;
  }
  return std::nullopt;
}

std::vector<Example> prepare_examples(const std::vector<data::Segment>& segs, bool include_high) {
  std::vector<Example> out;
  out.reserve(segs.size());
  for (const auto& s : segs) {
    require(s.data.rows() == graph::kNumChannels, ErrorKind::ShapeError,
            s.id + ": expected 19 canonical channels");
    Example e;
    e.subject = s.subject_id;
    e.present = s.present;
    e.bands = wavelet::packet_decompose(wavelet::trim_to_patches(s.data), include_high);
    e.target = wavelet::packet_reconstruct_partial(e.bands);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

using model::Model;

wavelet::BandDecomposition masked_bands(const wavelet::BandDecomposition& bd, const std::vector<double>& mask) {
  wavelet::BandDecomposition out = bd;
  for (auto& [b, m] : out.bands)
    for (std::size_t c = 0; c < m.rows(); ++c)
      if (mask[c] == 0.0)
        for (double& v : m.row(c)) v = 0.0;
  return out;
}

double present_count(const std::vector<double>& present) {
  return std::accumulate(present.begin(), present.end(), 0.0);
}

// Reconstruction loss on present channels; accumulates gradients scaled by
// weight when backward is set.
double ae_pass(const Model& m, const Example& ex, const std::vector<double>& mask, bool backward,
               double weight) {
  const auto bands = m.config().bands();
  const auto in = masked_bands(ex.bands, mask);
  wavelet::BandDecomposition recon;
  recon.n_patches = ex.bands.n_patches;
  recon.patch_samples = ex.bands.patch_samples;
  recon.channels = ex.bands.channels;
  std::map<Band, model::BandEncoder::Cache> ec;
  std::map<Band, model::BandDecoder::Cache> dc;
  std::map<Band, Parameter*> latents;
  for (auto b : bands) {
    const Matrix z = m.encoder(b).forward(in.at(b), mask, backward ? &ec[b] : nullptr);
    Parameter* lat = m.subjects().latent(ex.subject, b);
    latents[b] = lat;
    recon.bands[b] = m.decoder(b).forward(z, lat ? &lat->value : nullptr, backward ? &dc[b] : nullptr);
  }
  const Matrix xh = wavelet::packet_reconstruct_partial(recon);
  const double count = present_count(ex.present) * static_cast<double>(xh.cols());
  require(count > 0, ErrorKind::InvalidInput, "segment has no present channels");
  double loss = 0;
  Matrix g(xh.rows(), xh.cols());
  for (std::size_t c = 0; c < xh.rows(); ++c) {
    if (ex.present[c] == 0.0) continue;
    for (std::size_t t = 0; t < xh.cols(); ++t) {
      const double d = xh(c, t) - ex.target(c, t);
      loss += d * d;
      g(c, t) = 2 * d * weight / count;
    }
  }
  loss /= count;
  if (!backward) return loss;
  // Periodized db4 packets are orthonormal: the adjoint of synthesis is analysis.
  const auto gb = wavelet::packet_decompose(g, m.config().include_high);
  for (auto b : bands) {
    Parameter* lat = latents[b];
    const Matrix gz = m.decoder(b).backward(dc[b], gb.at(b), lat ? &lat->grad : nullptr);
    m.encoder(b).backward(ec[b], gz);
  }
  return loss;
}

struct BandPath {
  model::BandFrontend::Cache front;
  model::ManifoldTransformer::Cache wave;
};

// Logs entering the combination for one example, with caches when training.
std::map<Band, std::vector<Matrix>> band_logs(const Model& m, const std::map<Band, Matrix>& features,
                                              std::map<Band, BandPath>* caches) {
  std::map<Band, std::vector<Matrix>> out;
  for (auto b : m.config().bands()) {
    BandPath* c = caches ? &(*caches)[b] : nullptr;
    auto logs = m.frontend(b).forward(features.at(b), m.reduce(), c ? &c->front : nullptr);
    if (m.config().kind == model::ContextKind::large)
      logs = m.wavelet_transformer(b).forward(logs, c ? &c->wave : nullptr);
    out[b] = std::move(logs);
  }
  return out;
}

void band_logs_backward(const Model& m, std::map<Band, BandPath>& caches,
                        const std::map<Band, std::vector<Matrix>>& grads) {
  for (auto& [b, c] : caches) {
    auto g = grads.at(b);
    if (m.config().kind == model::ContextKind::large) g = m.wavelet_transformer(b).backward(c.wave, g);
    m.frontend(b).backward(c.front, m.reduce(), g);
  }
}

std::vector<std::map<Band, Matrix>> all_features(const Model& m, const std::vector<Example>& ex) {
  std::vector<std::map<Band, Matrix>> out;
  out.reserve(ex.size());
  for (const auto& e : ex) out.push_back(model::encode_bands(m, e.bands, e.present));
  return out;
}

// LOO over the concatenated patches of a batch.
double loo_pass(const Model& m, const std::vector<std::map<Band, Matrix>>& feats,
                const std::vector<std::size_t>& batch, Rng& rng, bool backward) {
  const auto bands = m.config().bands();
  std::vector<std::map<Band, BandPath>> caches(batch.size());
  std::vector<std::vector<Matrix>> logs(bands.size());
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto bl = band_logs(m, feats[batch[i]], backward ? &caches[i] : nullptr);
    offsets.push_back(logs[0].size());
    for (std::size_t k = 0; k < bands.size(); ++k)
      logs[k].insert(logs[k].end(), bl[bands[k]].begin(), bl[bands[k]].end());
  }
  const auto neg = sample_negatives(logs[0].size(), m.config().n_negatives, rng);
  LooGrads g;
  const double loss = loo_loss(logs, neg, m.tau().value(0, 0), backward ? &g : nullptr);
  if (!backward) return loss;
  m.tau().grad(0, 0) += g.tau;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::map<Band, std::vector<Matrix>> gi;
    const std::size_t n = (i + 1 < batch.size() ? offsets[i + 1] : logs[0].size()) - offsets[i];
    for (std::size_t k = 0; k < bands.size(); ++k)
      gi[bands[k]].assign(g.logs[k].begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                          g.logs[k].begin() + static_cast<std::ptrdiff_t>(offsets[i] + n));
    band_logs_backward(m, caches[i], gi);
  }
  return loss;
}

// MAE on one example. Gradients w.r.t. log M are added to grad_log_m.
double mae_pass(const Model& m, const std::map<Band, Matrix>* features, const std::vector<Matrix>* fixed_in,
                const model::MaskEmbedding& me, Rng& rng, bool backward, double weight, Matrix* grad_log_m) {
  std::map<Band, BandPath> caches;
  std::map<Band, std::vector<Matrix>> bl;
  std::vector<Matrix> in;
  if (fixed_in) {
    in = *fixed_in;
  } else {
    bl = band_logs(m, *features, backward ? &caches : nullptr);
    std::vector<std::vector<Matrix>> per_band;
    for (auto& [b, l] : bl) per_band.push_back(l);
    in = model::combine_band_logs(per_band);
  }
  const auto plan = sample_mask(in.size(), rng, m.config().mask_ratio);
  const auto masked = apply_mask_logs(in, plan, me.log_m);
  model::ManifoldTransformer::Cache cc;
  const auto pred = m.combined_transformer().forward(masked, backward ? &cc : nullptr);
  std::vector<Matrix> g;
  const double loss = mae_loss_logs(in, pred, plan, backward ? &g : nullptr);
  if (!backward) return loss;
  for (auto& x : g) x *= weight;
  const auto gin = m.combined_transformer().backward(cc, g);
  std::vector<bool> is_masked(in.size(), false);
  for (auto p : plan.masked) is_masked[p] = true;
  for (std::size_t p = 0; p < in.size(); ++p)
    if (is_masked[p]) *grad_log_m += gin[p];
  if (!fixed_in && !caches.empty()) {
    const double share = 1.0 / static_cast<double>(bl.size());
    std::map<Band, std::vector<Matrix>> gb;
    for (auto& [b, l] : bl) {
      auto& v = gb[b];
      for (std::size_t p = 0; p < in.size(); ++p)
        v.push_back(is_masked[p] ? Matrix(l[p].rows(), l[p].cols()) : gin[p] * share);
    }
    band_logs_backward(m, caches, gb);
  }
  return loss;
}

void mask_backward(const Model& m, const model::MaskEmbedding& me, const Matrix& grad_log_m) {
  const Matrix gm = spectral_backward(me.eig, SpectralFn::log, grad_log_m);
  m.mask().grad += cholesky_param_grad(m.mask().value, gm);
}

std::vector<Matrix> combined_input(const Model& m, const std::map<Band, Matrix>& features) {
  auto bl = band_logs(m, features, nullptr);
  std::vector<std::vector<Matrix>> per_band;
  for (auto& [b, l] : bl) per_band.push_back(std::move(l));
  return model::combine_band_logs(per_band);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double eval_recon(const Model& m, const std::vector<Example>& ex) {
  double s = 0;
  for (const auto& e : ex) s += ae_pass(m, e, e.present, false, 0.0);
  return s / static_cast<double>(ex.size());
}

double eval_loo(const Model& m, const std::vector<Example>& ex, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("eval.loo");
  std::vector<std::size_t> all(ex.size());
  std::iota(all.begin(), all.end(), 0);
  return loo_pass(m, all_features(m, ex), all, rng, false);
}

double eval_mae(const Model& m, const std::vector<Example>& ex, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("eval.mae");
  const auto me = model::mask_embedding(m);
  double s = 0;
  for (const auto& f : all_features(m, ex)) s += mae_pass(m, &f, nullptr, me, rng, false, 0.0, nullptr);
  return s / static_cast<double>(ex.size());
}

namespace {

std::unique_ptr<Model> stage_model(const RunConfig& cfg, Stage stage, const std::vector<data::Segment>& segs) {
  const auto prev = previous_stage(stage, cfg.model.kind);
  if (!prev) {
    model::ModelConfig mc = cfg.model;
    if (mc.subjects.empty()) {
      std::set<std::string> ids;
      for (const auto& s : segs) ids.insert(s.subject_id);
      mc.subjects.assign(ids.begin(), ids.end());
    }
    return std::make_unique<Model>(mc, cfg.seed);
  }
  const fs::path ckpt = cfg.out / (std::string(to_string(*prev)) + ".ckpt");
  require(fs::exists(ckpt), ErrorKind::StageOrderError,
          std::string(to_string(stage)) + " stage needs the " + std::string(to_string(*prev)) +
              " checkpoint " + ckpt.string());
  auto m = model::load_checkpoint(ckpt);
  const auto& st = m->stages();
  require(std::find(st.begin(), st.end(), std::string(to_string(*prev))) != st.end(),
          ErrorKind::StageOrderError, ckpt.string() + " does not record a completed " +
                                          std::string(to_string(*prev)) + " stage");
  json want = cfg.model.to_json(), have = m->config().to_json();
  if (cfg.model.subjects.empty()) want["subjects"] = have["subjects"];
  require(want == have, ErrorKind::ConfigError, "checkpoint model config differs from the run config");
  return m;
}

}  // namespace

StageResult run_stage(const RunConfig& cfg, Stage stage) {
  const auto segs = data::read_dataset(cfg.data);
  require(!segs.empty(), ErrorKind::EmptyInput, "dataset " + cfg.data.string() + " has no segments");
  auto mp = stage_model(cfg, stage, segs);
  Model& m = *mp;
  m.freeze_for_stage(to_string(stage));
  const auto ex = prepare_examples(segs, m.config().include_high);

  const std::size_t n = ex.size(), bs = std::min(cfg.batch_size, n);
  const std::size_t per_epoch = (n + bs - 1) / bs;
  const StagePlan plan = cfg.plan(stage, per_epoch);
  Optimizer opt({plan.lr, plan.weight_decay, 0.9, 0.999, 1e-8, plan.clip});
  Rng rng = Rng(cfg.seed).fork(std::string("train.") + std::string(to_string(stage)));
  const std::uint64_t eval_seed = cfg.seed;

  // Frozen upstream outputs are computed once.
  std::vector<std::map<Band, Matrix>> feats;
  std::vector<std::vector<Matrix>> fixed_in;
  if (stage != Stage::autoencoder) feats = all_features(m, ex);
  const bool cache_comb = stage == Stage::combined && m.config().kind == model::ContextKind::large;
  if (cache_comb)
    for (const auto& f : feats) fixed_in.push_back(combined_input(m, f));

  auto evaluate = [&] {
    switch (stage) {
      case Stage::autoencoder: return eval_recon(m, ex);
      case Stage::wavelet: return eval_loo(m, ex, eval_seed);
      case Stage::combined: return eval_mae(m, ex, eval_seed);
    }
    return 0.0;
  };

  StageResult res;
  res.stage = stage;
  res.eval_before = evaluate();
  io::ensure_dir(cfg.out);
  const fs::path metrics = cfg.out / "metrics.csv";
  const bool fresh = stage == Stage::autoencoder || !fs::exists(metrics);
  std::ofstream csv(metrics, fresh ? std::ios::trunc : std::ios::app);
  require(static_cast<bool>(csv), ErrorKind::IOError, "cannot write " + metrics.string());
  if (fresh) csv << "step,stage,loss_recon,loss_loo,loss_mae,lr\n";

  log().info("{} stage: {} examples, batch {}, {} steps, lr {}", to_string(stage), n, bs,
             plan.total_steps(), plan.lr);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t b0 = 0; b0 < n; b0 += bs, ++step) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b0 + bs)));
      const double w = 1.0 / static_cast<double>(batch.size());
      m.params().zero_grad();
      double loss = 0;
      if (stage == Stage::autoencoder) {
        for (auto i : batch) {
          const auto mask = graph::sample_channel_mask(graph::kNumChannels, m.config().channel_dropout, rng,
                                                       &ex[i].present);
          loss += w * ae_pass(m, ex[i], mask, true, w);
        }
      } else if (stage == Stage::wavelet) {
        loss = loo_pass(m, feats, batch, rng, true);
      } else {
        const auto me = model::mask_embedding(m);
        Matrix glm(me.log_m.rows(), me.log_m.cols());
        for (auto i : batch)
          loss += w * mae_pass(m, cache_comb ? nullptr : &feats[i], cache_comb ? &fixed_in[i] : nullptr, me, rng,
                               true, w, &glm);
        mask_backward(m, me, glm);
      }
      require(std::isfinite(loss), ErrorKind::DegenerateStep, "non-finite loss at step " + std::to_string(step));
      const double lr = plan.lr_at(step);
      opt.step(m.params(), lr);
      if (step == 0) res.first_loss = loss;
      res.last_loss = loss;
      csv << step << ',' << to_string(stage) << ',' << (stage == Stage::autoencoder ? fmt(loss) : "") << ','
          << (stage == Stage::wavelet ? fmt(loss) : "") << ',' << (stage == Stage::combined ? fmt(loss) : "")
          << ',' << fmt(lr) << '\n';
    }
  }
  res.steps = step;
  res.eval_after = evaluate();
  m.stages().push_back(std::string(to_string(stage)));
  res.checkpoint = cfg.out / (std::string(to_string(stage)) + ".ckpt");
  model::save_checkpoint(m, res.checkpoint);
  log().info("{} stage done: eval {} -> {}", to_string(stage), res.eval_before, res.eval_after);
  return res;
}

std::vector<StageResult> run(const RunConfig& cfg) {
  std::vector<Stage> stages;
  if (cfg.stage == "all") {
    stages.push_back(Stage::autoencoder);
    if (cfg.model.kind == model::ContextKind::large) stages.push_back(Stage::wavelet);
    stages.push_back(Stage::combined);
  } else {
    stages.push_back(stage_from_string(cfg.stage));
  }
  std::vector<StageResult> out;
  for (auto s : stages) out.push_back(run_stage(cfg, s));
  return out;
}

}  // namespace mendr::ssl
