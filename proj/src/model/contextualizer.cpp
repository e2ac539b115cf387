#include "mendr/model/contextualizer.hpp"

#include <algorithm>
#include <cmath>

#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/autodiff/spectral.hpp"
#include "mendr/error.hpp"
#include "mendr/graph/electrodes.hpp"

namespace mendr::model {

namespace {

constexpr std::size_t kC = graph::kNumChannels;

Matrix gaussian(std::size_t r, std::size_t c, double sd, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

// channels x (n * th) <-> (n * channels) x th, row p * channels + c.
Matrix to_rows(const Matrix& s, std::size_t th) {
  const std::size_t n = s.cols() / th;
  Matrix x(n * s.rows(), th);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < s.rows(); ++c)
      for (std::size_t t = 0; t < th; ++t) x(p * s.rows() + c, t) = s(c, p * th + t);
  return x;
}

Matrix from_rows(const Matrix& x, std::size_t channels) {
  const std::size_t th = x.cols(), n = x.rows() / channels;
  Matrix s(channels, n * th);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < th; ++t) s(c, p * th + t) = x(p * channels + c, t);
  return s;
}

double sim_grad(double d) {
  const double a = 1.0 + std::log1p(d);
  return -1.0 / (a * a * (1.0 + d));
}

// exp(G) trace-normalized, as eigenvalues: e^g / (sum e^g + eps) + eps,
// evaluated with the largest exponent factored out.
std::vector<double> trace_norm_exp(const std::vector<double>& g) {
  const double gmax = *std::max_element(g.begin(), g.end());
  double t = 0.0;
  for (double v : g) t += std::exp(v - gmax);
  const double denom = t + kSpdEps * std::exp(-gmax);
  std::vector<double> y(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) y[k] = std::exp(g[k] - gmax) / denom + kSpdEps;
  return y;
}

// Backward of Y = tracenorm(exp(G)) given dL/dY, with G = U diag(g) U^T.
Matrix trace_norm_exp_backward(const EigenDecomposition& g_eig, const Matrix& gy) {
  const std::size_t n = g_eig.dim();
  double t = 0.0;
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) t += r[k] = std::exp(g_eig.values[k]);
  const Matrix h = congruence(g_eig.vectors.transposed(), gy);  // U^T G U
  double dot = 0.0;
  for (std::size_t k = 0; k < n; ++k) dot += h(k, k) * r[k];
  const double s = t + kSpdEps;
  Matrix gr = gy * (1.0 / s);
  for (std::size_t i = 0; i < n; ++i) gr(i, i) -= dot / (s * s);
  return spectral_backward(g_eig, SpectralFn::exp, gr);
}

Matrix sym_grad_of_congruence(const Matrix& w, const Matrix& a, const Matrix& g) {
  // d<G, W A W^T>/dW = 2 G W A for symmetric G and A.
  return 2.0 * matmul(matmul(g, w), a);
}

EigenDecomposition eig_of(const Matrix& m) { return sym_eig(SymmetricMatrix(m)); }

}  // namespace

Matrix log_from_eig(const EigenDecomposition& e) {
  std::vector<double> l(e.values.size());
  for (std::size_t k = 0; k < l.size(); ++k) l[k] = std::log(e.values[k]);
  return symmetrized(congruence_diag(e.vectors, l));
}

PatchMlp::PatchMlp(const std::string& prefix, std::size_t th, ParameterSet& ps, Rng& rng) : th_(th) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(th));
  w1_ = &ps.add(prefix + ".w1", ParamGroup::euclidean, gaussian(th, 2 * th, sd, rng));
  b1_ = &ps.add(prefix + ".b1", ParamGroup::euclidean, Matrix(1, 2 * th));
  w2_ = &ps.add(prefix + ".w2", ParamGroup::euclidean,
                gaussian(2 * th, th, 1.0 / std::sqrt(2.0 * static_cast<double>(th)), rng));
  b2_ = &ps.add(prefix + ".b2", ParamGroup::euclidean, Matrix(1, th));
}

Matrix PatchMlp::forward(const Matrix& s, Cache* cache) const {
  require(s.cols() % th_ == 0, ErrorKind::ShapeError, "MLP input width");
  Matrix x = to_rows(s, th_);
  Matrix pre = nn::linear(x, w1_->value, &b1_->value);
  const Matrix y = nn::linear(nn::gelu(pre), w2_->value, &b2_->value);
  if (cache) *cache = Cache{std::move(x), std::move(pre)};
  return from_rows(y, s.rows());
}

Matrix PatchMlp::backward(const Cache& c, const Matrix& grad) const {
  const Matrix gy = to_rows(grad, th_);
  const Matrix gh = nn::linear_backward(nn::gelu(c.pre), w2_->value, gy, w2_->grad, &b2_->grad);
  const Matrix gpre = nn::gelu_backward(c.pre, gh);
  const Matrix gx = nn::linear_backward(c.x, w1_->value, gpre, w1_->grad, &b1_->grad);
  return from_rows(gx, grad.rows());
}

Acpe::Acpe(const std::string& prefix, std::size_t th, ParameterSet& ps) : th_(th) {
  k_ = &ps.add(prefix, ParamGroup::euclidean, Matrix(th, 3 * kC));
}

Matrix Acpe::forward(const Matrix& s) const {
  require(s.rows() == kC && s.cols() % th_ == 0, ErrorKind::ShapeError, "ACPE input shape");
  const std::size_t n = s.cols() / th_;
  const Matrix& k = k_->value;
  Matrix out = s;
  for (std::size_t p = 0; p < n; ++p)
    for (int dp = -1; dp <= 1; ++dp) {
      const long q = static_cast<long>(p) + dp;
      if (q < 0 || q >= static_cast<long>(n)) continue;
      for (std::size_t c = 0; c < kC; ++c)
        for (std::size_t c2 = 0; c2 < kC; ++c2) {
          const long off = static_cast<long>(c2) - static_cast<long>(c) + 9;
          if (off < 0 || off >= static_cast<long>(kC)) continue;
          const std::size_t col = static_cast<std::size_t>(dp + 1) * kC + static_cast<std::size_t>(off);
          for (std::size_t t = 0; t < th_; ++t)
            out(c, p * th_ + t) += k(t, col) * s(c2, static_cast<std::size_t>(q) * th_ + t);
        }
    }
  return out;
}

Matrix Acpe::backward(const Matrix& s, const Matrix& grad) const {
  const std::size_t n = s.cols() / th_;
  const Matrix& k = k_->value;
  Matrix& gk = k_->grad;
  Matrix gs = grad;
  for (std::size_t p = 0; p < n; ++p)
    for (int dp = -1; dp <= 1; ++dp) {
      const long q = static_cast<long>(p) + dp;
      if (q < 0 || q >= static_cast<long>(n)) continue;
      for (std::size_t c = 0; c < kC; ++c)
        for (std::size_t c2 = 0; c2 < kC; ++c2) {
          const long off = static_cast<long>(c2) - static_cast<long>(c) + 9;
          if (off < 0 || off >= static_cast<long>(kC)) continue;
          const std::size_t col = static_cast<std::size_t>(dp + 1) * kC + static_cast<std::size_t>(off);
          for (std::size_t t = 0; t < th_; ++t) {
            const double g = grad(c, p * th_ + t);
            const std::size_t sc = static_cast<std::size_t>(q) * th_ + t;
            gk(t, col) += g * s(c2, sc);
            gs(c2, sc) += g * k(t, col);
          }
        }
    }
  return gs;
}

std::vector<Matrix> to_spd_sequence(const Matrix& s, std::size_t th) {
  require(th >= 2, ErrorKind::InvalidInput, "SCM needs t_hidden >= 2");
  require(s.cols() % th == 0, ErrorKind::ShapeError, "SCM input width");
  const std::size_t n = s.cols() / th;
  std::vector<Matrix> out;
  out.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    Matrix x(s.rows(), th);
    for (std::size_t c = 0; c < s.rows(); ++c)
      for (std::size_t t = 0; t < th; ++t) x(c, t) = s(c, p * th + t);
    out.push_back(trace_norm(scm_raw(x)));
  }
  return out;
}

Matrix to_spd_backward(const Matrix& s, std::size_t th, const std::vector<Matrix>& grads) {
  const std::size_t n = s.cols() / th;
  require(grads.size() == n, ErrorKind::ShapeError, "SCM gradient count");
  Matrix gs(s.rows(), s.cols());
  for (std::size_t p = 0; p < n; ++p) {
    Matrix x(s.rows(), th);
    for (std::size_t c = 0; c < s.rows(); ++c)
      for (std::size_t t = 0; t < th; ++t) x(c, t) = s(c, p * th + t);
    const Matrix gc = trace_norm_backward(scm_raw(x), grads[p]);
    const Matrix gx = matmul(gc + gc.transposed(), x) * (1.0 / static_cast<double>(th - 1));
    for (std::size_t c = 0; c < s.rows(); ++c)
      for (std::size_t t = 0; t < th; ++t) gs(c, p * th + t) = gx(c, t);
  }
  return gs;
}

ManifoldTransformer::ManifoldTransformer(const std::string& prefix, std::size_t dim,
                                         std::size_t layers, ParameterSet& ps, Rng& rng)
    : dim_(dim) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l) + ".";
    wq_.push_back(&ps.add(p + "wq", ParamGroup::stiefel, stiefel_init(dim, dim, rng)));
    wk_.push_back(&ps.add(p + "wk", ParamGroup::stiefel, stiefel_init(dim, dim, rng)));
    wv_.push_back(&ps.add(p + "wv", ParamGroup::stiefel, stiefel_init(dim, dim, rng)));
    wf_.push_back(&ps.add(p + "wf", ParamGroup::stiefel, stiefel_init(dim, dim, rng)));
  }
}

std::vector<Matrix> ManifoldTransformer::layer_forward(std::size_t l, const std::vector<Matrix>& in,
                                                       LayerCache& c, const SpdProbe* probe) const {
  const std::size_t n = in.size();
  const Matrix& wq = wq_[l]->value;
  const Matrix& wk = wk_[l]->value;
  const Matrix& wv = wv_[l]->value;
  const Matrix& wf = wf_[l]->value;
  c.in = in;
  c.p.resize(n);
  c.k.resize(n);
  c.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.p[i] = symmetrized(congruence(wq, in[i]));
    c.k[i] = symmetrized(congruence(wk, in[i]));
    c.v[i] = symmetrized(congruence(wv, in[i]));
  }
  c.dist = Matrix(n, n);
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      c.dist(i, j) = lem_distance_logs(c.p[i], c.k[j]);
      sim(i, j) = sim_from_distance(c.dist(i, j));
    }
  c.attn = nn::softmax_rows(sim);

  c.g_eig.resize(n);
  c.y_eig.resize(n);
  c.g2_eig.resize(n);
  c.z_eig.resize(n);
  c.logy.resize(n);
  std::vector<Matrix> out(n);
  const std::string tag = "layer" + std::to_string(l);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix g = in[i];
    for (std::size_t j = 0; j < n; ++j) g += c.attn(i, j) * c.v[j];
    c.g_eig[i] = eig_of(g);
    c.y_eig[i] = EigenDecomposition{trace_norm_exp(c.g_eig[i].values), c.g_eig[i].vectors};
    c.logy[i] = log_from_eig(c.y_eig[i]);
    const Matrix g2 = c.logy[i] + symmetrized(congruence(wf, c.logy[i]));
    c.g2_eig[i] = eig_of(g2);
    c.z_eig[i] = EigenDecomposition{trace_norm_exp(c.g2_eig[i].values), c.g2_eig[i].vectors};
    out[i] = log_from_eig(c.z_eig[i]);
    if (probe) {
      // Assemble every intermediate SPD matrix and decompose it afresh.
      const auto min_of = [](const Matrix& m) { return sym_eig(SymmetricMatrix(m)).values.back(); };
      const auto expm = [](const Matrix& s) {
        return sym_eig(SymmetricMatrix(s)).apply([](double x) { return std::exp(x); });
      };
      Matrix attn_log(dim_, dim_);
      for (std::size_t j = 0; j < n; ++j) attn_log += c.attn(i, j) * c.v[j];
      (*probe)(tag + ".attention", min_of(expm(attn_log)));
      (*probe)(tag + ".residual1", min_of(expm(g)));
      (*probe)(tag + ".tracenorm1", min_of(c.y_eig[i].reconstruct()));
      (*probe)(tag + ".bimap", min_of(expm(congruence(wf, c.logy[i]))));
      (*probe)(tag + ".residual2", min_of(expm(g2)));
      (*probe)(tag + ".tracenorm2", min_of(c.z_eig[i].reconstruct()));
    }
  }
  return out;
}

std::vector<Matrix> ManifoldTransformer::layer_backward(std::size_t l, const LayerCache& c,
                                                        const std::vector<Matrix>& grads) const {
  const std::size_t n = c.in.size();
  const Matrix& wq = wq_[l]->value;
  const Matrix& wk = wk_[l]->value;
  const Matrix& wv = wv_[l]->value;
  const Matrix& wf = wf_[l]->value;
  std::vector<Matrix> gin(n), gg(n), gp(n, Matrix(dim_, dim_)), gk(n, Matrix(dim_, dim_)),
      gv(n, Matrix(dim_, dim_));
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix gz = spectral_backward(c.z_eig[i], SpectralFn::log, symmetrized(grads[i]));
    const Matrix gg2 = symmetrized(trace_norm_exp_backward(c.g2_eig[i], gz));
    wf_[l]->grad += sym_grad_of_congruence(wf, c.logy[i], gg2);
    const Matrix glogy = gg2 + symmetrized(matmul_tn(wf, matmul(gg2, wf)));
    const Matrix gy = spectral_backward(c.y_eig[i], SpectralFn::log, glogy);
    gg[i] = symmetrized(trace_norm_exp_backward(c.g_eig[i], gy));
    gin[i] = gg[i];
  }
  Matrix gw(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      gw(i, j) = inner(gg[i], c.v[j]);
      gv[j] += c.attn(i, j) * gg[i];
    }
  const Matrix gs = nn::softmax_rows_backward(c.attn, gw);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = c.dist(i, j);
      if (d <= 0.0) continue;
      const double coef = gs(i, j) * sim_grad(d) / d;
      Matrix diff = c.p[i] - c.k[j];
      diff *= coef;
      gp[i] += diff;
      gk[j] -= diff;
    }
  for (std::size_t i = 0; i < n; ++i) {
    wq_[l]->grad += sym_grad_of_congruence(wq, c.in[i], gp[i]);
    wk_[l]->grad += sym_grad_of_congruence(wk, c.in[i], gk[i]);
    wv_[l]->grad += sym_grad_of_congruence(wv, c.in[i], gv[i]);
    gin[i] += matmul_tn(wq, matmul(gp[i], wq));
    gin[i] += matmul_tn(wk, matmul(gk[i], wk));
    gin[i] += matmul_tn(wv, matmul(gv[i], wv));
    gin[i] = symmetrized(gin[i]);
  }
  return gin;
}

std::vector<Matrix> ManifoldTransformer::forward(const std::vector<Matrix>& logs, Cache* cache,
                                                 const SpdProbe* probe) const {
  for (const auto& m : logs)
    require(m.rows() == dim_ && m.cols() == dim_, ErrorKind::ShapeError,
            "transformer expects " + std::to_string(dim_) + "x" + std::to_string(dim_) + " inputs");
  if (cache) cache->layers.assign(depth(), {});
  std::vector<Matrix> x = logs;
  LayerCache local;
  for (std::size_t l = 0; l < depth(); ++l)
    x = layer_forward(l, x, cache ? cache->layers[l] : local, probe);
  return x;
}

std::vector<Matrix> ManifoldTransformer::backward(const Cache& cache,
                                                  const std::vector<Matrix>& grads) const {
  std::vector<Matrix> g = grads;
  for (std::size_t l = depth(); l-- > 0;) g = layer_backward(l, cache.layers[l], g);
  return g;
}

Matrix ManifoldTransformer::attention(const std::vector<Matrix>& logs, std::size_t layer) const {
  require(layer < depth(), ErrorKind::InvalidInput, "layer index");
  Cache c;
  c.layers.assign(depth(), {});
  std::vector<Matrix> x = logs;
  for (std::size_t l = 0; l <= layer; ++l) x = layer_forward(l, x, c.layers[l], nullptr);
  return c.layers[layer].attn;
}

BandFrontend::BandFrontend(const std::string& prefix, std::size_t th, ParameterSet& ps, Rng& rng)
    : th_(th), mlp_(prefix + ".mlp", th, ps, rng), acpe_(prefix + ".acpe", th, ps) {}

std::vector<Matrix> BandFrontend::forward(const Matrix& features, const Parameter* reduce,
                                          Cache* cache, const SpdProbe* probe) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = mlp_.forward(features, &c.mlp);
  c.s = acpe_.forward(c.x);
  c.y = to_spd_sequence(c.s, th_);
  const std::size_t n = c.y.size();
  c.eig.resize(n);
  std::vector<Matrix> logs(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Matrix m = reduce ? symmetrized(congruence(reduce->value, c.y[p])) : c.y[p];
    c.eig[p] = eig_of(m);
    require(c.eig[p].values.back() > 0.0, ErrorKind::NotPositiveDefinite,
            "embedding lost positive definiteness");
    if (probe) {
      if (reduce) (*probe)("scm", sym_eig(SymmetricMatrix(c.y[p])).values.back());
      (*probe)(reduce ? "reduce" : "scm", c.eig[p].values.back());
    }
    logs[p] = log_from_eig(c.eig[p]);
  }
  return logs;
}

void BandFrontend::backward(const Cache& c, Parameter* reduce, const std::vector<Matrix>& grads) const {
  const std::size_t n = c.y.size();
  std::vector<Matrix> gy(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Matrix gm = symmetrized(spectral_backward(c.eig[p], SpectralFn::log, symmetrized(grads[p])));
    if (reduce) {
      reduce->grad += sym_grad_of_congruence(reduce->value, c.y[p], gm);
      gy[p] = matmul_tn(reduce->value, matmul(gm, reduce->value));
    } else {
      gy[p] = gm;
    }
  }
  const Matrix gs = to_spd_backward(c.s, th_, gy);
  const Matrix gx = acpe_.backward(c.x, gs);
  mlp_.backward(c.mlp, gx);
}

std::vector<Matrix> combine_band_logs(const std::vector<std::vector<Matrix>>& per_band) {
  require(!per_band.empty(), ErrorKind::EmptyInput, "no bands to combine");
  const std::size_t n = per_band.front().size();
  for (const auto& b : per_band)
    require(b.size() == n, ErrorKind::ShapeError, "bands disagree on patch count");
  std::vector<Matrix> out(n);
  const double inv = 1.0 / static_cast<double>(per_band.size());
  for (std::size_t p = 0; p < n; ++p) {
    out[p] = per_band.front()[p];
    for (std::size_t b = 1; b < per_band.size(); ++b) out[p] += per_band[b][p];
    out[p] *= inv;
  }
  return out;
}

}  // namespace mendr::model
