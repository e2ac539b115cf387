#include "mendr/model/autoencoder.hpp"

#include <cmath>

#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"

namespace mendr::model {

namespace {

Matrix gaussian(std::size_t r, std::size_t c, double sd, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

Matrix ones(std::size_t c) {
  Matrix m(1, c);
  for (double& v : m.values()) v = 1.0;
  return m;
}

Tensor3 tensor_of(const Matrix& m) { return Tensor3::from_matrix(m); }

}  // namespace

Matrix patch_slice(const Matrix& m, std::size_t p, std::size_t w) {
  Matrix out(m.rows(), w);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = m(i, p * w + j);
  return out;
}

void set_patch_slice(Matrix& m, std::size_t p, const Matrix& block) {
  const std::size_t w = block.cols();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < w; ++j) m(i, p * w + j) = block(i, j);
}

BandEncoder::BandEncoder(const EncoderConfig& cfg, const std::string& prefix, ParameterSet& ps,
                         Rng& rng)
    : cfg_(cfg), harmonizer_(prefix + ".harm", cfg.patch_length, ps, rng) {
  const std::size_t ch = cfg.conv_channels;
  const std::array<std::size_t, 3> cin{1, ch, ch}, cout{ch, ch, 1};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t fan_in = cin[k] * cfg.strides[k];
    conv_[k] = &ps.add(prefix + ".conv" + std::to_string(k), ParamGroup::euclidean,
                       gaussian(cout[k], fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
    gn_g_[k] = &ps.add(prefix + ".gn" + std::to_string(k) + ".g", ParamGroup::euclidean, ones(cout[k]));
    gn_b_[k] = &ps.add(prefix + ".gn" + std::to_string(k) + ".b", ParamGroup::euclidean,
                       Matrix(1, cout[k]));
  }
}

Matrix BandEncoder::conv_forward(const Matrix& patch, std::array<ConvBlockCache, 3>* cache) const {
  std::array<ConvBlockCache, 3> local;
  auto& c = cache ? *cache : local;
  Tensor3 x = tensor_of(patch);
  for (std::size_t k = 0; k < 3; ++k) {
    c[k].in = x;
    const Tensor3 y = nn::conv_stride(x, conv_[k]->value, cfg_.strides[k]);
    c[k].pre = nn::group_norm(y, k < 2 ? cfg_.groups : 1, gn_g_[k]->value, gn_b_[k]->value, c[k].gn);
    x = c[k].pre;
    nn::gelu_inplace(x);
  }
  return x.channel(0);
}

Matrix BandEncoder::conv_backward(const std::array<ConvBlockCache, 3>& c, const Matrix& grad) const {
  Tensor3 g = tensor_of(grad);
  for (std::size_t k = 3; k-- > 0;) {
    nn::gelu_backward_inplace(c[k].pre, g);
    g = nn::group_norm_backward(g, k < 2 ? cfg_.groups : 1, gn_g_[k]->value, c[k].gn,
                                gn_g_[k]->grad, gn_b_[k]->grad);
    g = nn::conv_stride_backward(c[k].in, conv_[k]->value, cfg_.strides[k], g, conv_[k]->grad);
  }
  return g.channel(0);
}

Matrix BandEncoder::forward(const Matrix& coeffs, const std::vector<double>& mask,
                            Cache* cache) const {
  const std::size_t t = cfg_.patch_length;
  require(coeffs.rows() == graph::kNumChannels && coeffs.cols() % t == 0, ErrorKind::ShapeError,
          "encoder input must be 19 x (n * " + std::to_string(t) + ")");
  const std::size_t n = coeffs.cols() / t;
  const Matrix& dist = graph::standard_graph().dist;
  const Matrix h = harmonizer_.forward(coeffs, mask, dist, cache ? &cache->harmonizer : nullptr);
  if (cache) cache->patches.assign(n, {});
  Matrix out(coeffs.rows(), n * cfg_.t_hidden);
  for (std::size_t p = 0; p < n; ++p)
    set_patch_slice(out, p, conv_forward(patch_slice(h, p, t), cache ? &cache->patches[p] : nullptr));
  return out;
}

Matrix BandEncoder::backward(const Cache& cache, const Matrix& grad) const {
  const std::size_t n = cache.patches.size();
  Matrix gh(grad.rows(), n * cfg_.patch_length);
  for (std::size_t p = 0; p < n; ++p)
    set_patch_slice(gh, p, conv_backward(cache.patches[p], patch_slice(grad, p, cfg_.t_hidden)));
  return harmonizer_.backward(cache.harmonizer, graph::standard_graph().dist, gh);
}

SubjectTable::SubjectTable(const std::vector<std::string>& subjects,
                           const std::vector<wavelet::Band>& bands, ParameterSet& ps)
    : n_subjects_(subjects.size()) {
  for (const auto& s : subjects)
    for (auto b : bands) {
      const auto cfg = encoder_config(b);
      table_[{s, b}] = &ps.add("dec." + std::string(wavelet::name(b)) + ".subj." + s,
                               ParamGroup::euclidean, Matrix(graph::kNumChannels, cfg.t_hidden));
    }
}

Parameter* SubjectTable::latent(const std::string& subject, wavelet::Band b) const {
  auto it = table_.find({subject, b});
  return it == table_.end() ? nullptr : it->second;
}

BandDecoder::BandDecoder(const EncoderConfig& cfg, const std::string& prefix, ParameterSet& ps,
                         Rng& rng)
    : cfg_(cfg) {
  const std::size_t ch = cfg.conv_channels;
  // Strides run in reverse order of the encoder.
  const std::array<std::size_t, 3> cin{1, ch, ch}, cout{ch, ch, 1};
  const std::array<std::size_t, 3> k{cfg.strides[2], cfg.strides[1], cfg.strides[0]};
  for (std::size_t i = 0; i < 3; ++i)
    convt_[i] = &ps.add(prefix + ".convt" + std::to_string(i), ParamGroup::euclidean,
                        gaussian(cin[i], cout[i] * k[i],
                                 1.0 / std::sqrt(static_cast<double>(cin[i])), rng));
  for (std::size_t i = 0; i < 2; ++i) {
    gn_g_[i] = &ps.add(prefix + ".gn" + std::to_string(i) + ".g", ParamGroup::euclidean, ones(ch));
    gn_b_[i] = &ps.add(prefix + ".gn" + std::to_string(i) + ".b", ParamGroup::euclidean, Matrix(1, ch));
  }
  se_ = graph::make_se(prefix, graph::kNumChannels, ps, rng);
  lin_w_ = &ps.add(prefix + ".lin.w", ParamGroup::euclidean, Matrix(cfg.patch_length, cfg.patch_length));
  lin_b_ = &ps.add(prefix + ".lin.b", ParamGroup::euclidean, Matrix(1, cfg.patch_length));
}

Matrix BandDecoder::forward(const Matrix& z, const Matrix* latent, Cache* cache) const {
  const std::size_t th = cfg_.t_hidden;
  require(z.rows() == graph::kNumChannels && z.cols() % th == 0, ErrorKind::ShapeError,
          "decoder input must be 19 x (n * " + std::to_string(th) + ")");
  require(!latent || (latent->rows() == z.rows() && latent->cols() == th), ErrorKind::ShapeError,
          "subject latent shape");
  const std::size_t n = z.cols() / th;
  const std::array<std::size_t, 3> k{cfg_.strides[2], cfg_.strides[1], cfg_.strides[0]};
  Matrix out(z.rows(), n * cfg_.patch_length);
  std::vector<PatchCache> local(cache ? 0 : 1);
  if (cache) {
    cache->patches.assign(n, {});
    cache->has_latent = latent != nullptr;
  }
  for (std::size_t p = 0; p < n; ++p) {
    PatchCache& c = cache ? cache->patches[p] : local[0];
    Matrix zp = patch_slice(z, p, th);
    if (latent) zp += *latent;
    c.in0 = tensor_of(zp);
    c.pre0 = nn::group_norm(nn::conv_transpose_stride(c.in0, convt_[0]->value, k[0]), cfg_.groups,
                            gn_g_[0]->value, gn_b_[0]->value, c.gn0);
    c.in1 = c.pre0;
    nn::gelu_inplace(c.in1);
    c.pre1 = nn::group_norm(nn::conv_transpose_stride(c.in1, convt_[1]->value, k[1]), cfg_.groups,
                            gn_g_[1]->value, gn_b_[1]->value, c.gn1);
    c.in2 = c.pre1;
    nn::gelu_inplace(c.in2);
    const Matrix y = nn::conv_transpose_stride(c.in2, convt_[2]->value, k[2]).channel(0);
    c.gated = graph::se_forward(se_, y, &c.se);
    set_patch_slice(out, p, nn::linear(c.gated, lin_w_->value, &lin_b_->value));
  }
  return out;
}

Matrix BandDecoder::backward(const Cache& cache, const Matrix& grad, Matrix* grad_latent) const {
  const std::size_t n = cache.patches.size();
  const std::array<std::size_t, 3> k{cfg_.strides[2], cfg_.strides[1], cfg_.strides[0]};
  Matrix gz(grad.rows(), n * cfg_.t_hidden);
  for (std::size_t p = 0; p < n; ++p) {
    const PatchCache& c = cache.patches[p];
    Matrix g = nn::linear_backward(c.gated, lin_w_->value, patch_slice(grad, p, cfg_.patch_length),
                                   lin_w_->grad, &lin_b_->grad);
    g = graph::se_backward(se_, c.se, g);
    Tensor3 t = nn::conv_transpose_stride_backward(c.in2, convt_[2]->value, k[2], tensor_of(g),
                                                   convt_[2]->grad);
    nn::gelu_backward_inplace(c.pre1, t);
    t = nn::group_norm_backward(t, cfg_.groups, gn_g_[1]->value, c.gn1, gn_g_[1]->grad, gn_b_[1]->grad);
    t = nn::conv_transpose_stride_backward(c.in1, convt_[1]->value, k[1], t, convt_[1]->grad);
    nn::gelu_backward_inplace(c.pre0, t);
    t = nn::group_norm_backward(t, cfg_.groups, gn_g_[0]->value, c.gn0, gn_g_[0]->grad, gn_b_[0]->grad);
    t = nn::conv_transpose_stride_backward(c.in0, convt_[0]->value, k[0], t, convt_[0]->grad);
    const Matrix gp = t.channel(0);
    set_patch_slice(gz, p, gp);
    if (grad_latent && cache.has_latent) *grad_latent += gp;
  }
  return gz;
}

}  // namespace mendr::model
