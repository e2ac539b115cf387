#include "mendr/graph/harmonizer.hpp"

#include <algorithm>
#include <cmath>

#include "mendr/error.hpp"

namespace mendr::graph {

namespace {

Matrix gaussian(std::size_t r, std::size_t c, double stddev, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

Matrix filled(std::size_t r, std::size_t c, double v) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = v;
  return m;
}


double leaky_grad(double x) { return x > 0.0 ? 1.0 : 0.2; }

// Gate open on missing channels (sigmoid(4)) and nearly shut on present ones.
constexpr double kGateSlope = -8.0;
constexpr double kGateBias = 4.0;

}  // namespace

SqueezeExcitation make_se(const std::string& prefix, std::size_t channels, ParameterSet& ps,
                          Rng& rng) {
  SqueezeExcitation se;
  const double sd = 1.0 / std::sqrt(static_cast<double>(channels));
  se.w1 = &ps.add(prefix + ".se.w1", ParamGroup::euclidean, gaussian(channels, channels, sd, rng));
  se.b1 = &ps.add(prefix + ".se.b1", ParamGroup::euclidean, Matrix(1, channels));
  se.w2 = &ps.add(prefix + ".se.w2", ParamGroup::euclidean, Matrix(channels, channels));
  se.b2 = &ps.add(prefix + ".se.b2", ParamGroup::euclidean, Matrix(1, channels));
  return se;
}

Matrix se_forward(const SqueezeExcitation& se, const Matrix& x, SeCache* cache) {
  const std::size_t c = x.rows(), t = x.cols();
  require(se.w1->value.rows() == c, ErrorKind::ShapeError, "squeeze-excitation channel count");
  Matrix s(1, c);
  for (std::size_t i = 0; i < c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < t; ++j) acc += x(i, j);
    s(0, i) = acc / static_cast<double>(t);
  }
  Matrix pre = nn::linear(s, se.w1->value, &se.b1->value);
  Matrix h = pre;
  for (std::size_t i = 0; i < c; ++i) h(0, i) = std::max(0.0, h(0, i));
  Matrix z = nn::linear(h, se.w2->value, &se.b2->value);
  for (std::size_t i = 0; i < c; ++i) z(0, i) = nn::sigmoid(z(0, i));
  Matrix y = x;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < t; ++j) y(i, j) *= z(0, i);
  if (cache) *cache = SeCache{x, std::move(s), std::move(pre), std::move(h), std::move(z)};
  return y;
}

Matrix se_backward(const SqueezeExcitation& se, const SeCache& k, const Matrix& gy) {
  const std::size_t c = k.x.rows(), t = k.x.cols();
  Matrix gx = gy;
  Matrix gq(1, c);
  for (std::size_t i = 0; i < c; ++i) {
    double gz = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      gz += gy(i, j) * k.x(i, j);
      gx(i, j) *= k.z(0, i);
    }
    gq(0, i) = gz * k.z(0, i) * (1.0 - k.z(0, i));
  }
  Matrix gh = nn::linear_backward(k.h, se.w2->value, gq, se.w2->grad, &se.b2->grad);
  for (std::size_t i = 0; i < c; ++i)
    if (k.pre(0, i) <= 0.0) gh(0, i) = 0.0;
  Matrix gs = nn::linear_backward(k.s, se.w1->value, gh, se.w1->grad, &se.b1->grad);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < t; ++j) gx(i, j) += gs(0, i) / static_cast<double>(t);
  return gx;
}

Harmonizer::Harmonizer(const std::string& prefix, std::size_t t, ParameterSet& ps, Rng& rng)
    : t_(t) {
  require(t > 0, ErrorKind::InvalidInput, "harmonizer patch length must be positive");
  const std::size_t f = t + 1;
  const double sd_f = 1.0 / std::sqrt(static_cast<double>(f));
  for (std::size_t k = 0; k < kHarmonizerBlocks; ++k) {
    const std::string p = prefix + ".gat" + std::to_string(k) + ".";
    GatBlock& b = blocks_[k];
    b.wz = &ps.add(p + "wz", ParamGroup::euclidean, Matrix::identity(f));
    b.a_src = &ps.add(p + "a_src", ParamGroup::euclidean, gaussian(f, 1, 0.1 * sd_f, rng));
    b.a_dst = &ps.add(p + "a_dst", ParamGroup::euclidean, gaussian(f, 1, 0.1 * sd_f, rng));
    b.rho = &ps.add(p + "rho", ParamGroup::euclidean, Matrix(1, 1));
    b.wo = &ps.add(p + "wo", ParamGroup::euclidean, k == 0 ? Matrix::identity(f) : Matrix(f, f));
    Matrix gate(1, 2);
    if (k == 0) {
      gate(0, 0) = kGateSlope;
      gate(0, 1) = kGateBias;
    }
    b.gate = &ps.add(p + "gate", ParamGroup::euclidean, std::move(gate));
    b.w1 = &ps.add(p + "w1", ParamGroup::euclidean, gaussian(f, kFfnDim, sd_f, rng));
    b.b1 = &ps.add(p + "b1", ParamGroup::euclidean, Matrix(1, kFfnDim));
    b.ln_g = &ps.add(p + "ln_g", ParamGroup::euclidean, filled(1, kFfnDim, 1.0));
    b.ln_b = &ps.add(p + "ln_b", ParamGroup::euclidean, Matrix(1, kFfnDim));
    b.w2 = &ps.add(p + "w2", ParamGroup::euclidean, Matrix(kFfnDim, f));
    b.b2 = &ps.add(p + "b2", ParamGroup::euclidean, Matrix(1, f));
  }
  se_ = make_se(prefix, kNumChannels, ps, rng);
}

Matrix Harmonizer::block_forward(std::size_t k, const Matrix& h, const std::vector<double>& mask,
                                 const Matrix& dist, GatBlockCache& c) const {
  const GatBlock& b = blocks_[k];
  const std::size_t n = h.rows();
  c.h_in = h;
  c.z = matmul(h, b.wz->value);
  c.v = c.z;
  if (k == 0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c.v.cols(); ++j) c.v(i, j) *= mask[i];
  const Matrix es = matmul(c.z, b.a_src->value);
  const Matrix ed = matmul(c.z, b.a_dst->value);
  const double beta = std::exp(b.rho->value(0, 0));
  c.raw = Matrix(n, n);
  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      c.raw(i, j) = es(i, 0) + ed(j, 0);
      e(i, j) = nn::leaky_relu(c.raw(i, j)) - beta * dist(i, j);
    }
  c.attn = nn::softmax_rows(e);
  c.o = matmul(c.attn, c.v);
  c.u = matmul(c.o, b.wo->value);
  c.g.resize(n);
  c.h_mid = h;
  for (std::size_t i = 0; i < n; ++i) {
    c.g[i] = nn::sigmoid(b.gate->value(0, 0) * mask[i] + b.gate->value(0, 1));
    for (std::size_t j = 0; j < h.cols(); ++j) c.h_mid(i, j) += c.g[i] * c.u(i, j);
  }
  const Matrix p = nn::linear(c.h_mid, b.w1->value, &b.b1->value);
  c.q = nn::layer_norm(p, b.ln_g->value, b.ln_b->value, c.ln);
  Matrix out = c.h_mid;
  out += nn::linear(nn::gelu(c.q), b.w2->value, &b.b2->value);
  return out;
}

Matrix Harmonizer::block_backward(std::size_t k, const GatBlockCache& c,
                                  const std::vector<double>& mask, const Matrix& dist,
                                  const Matrix& gy) const {
  const GatBlock& b = blocks_[k];
  const std::size_t n = c.h_in.rows();
  // Feed-forward branch.
  const Matrix r = nn::gelu(c.q);
  const Matrix gr = nn::linear_backward(r, b.w2->value, gy, b.w2->grad, &b.b2->grad);
  const Matrix gq = nn::gelu_backward(c.q, gr);
  const Matrix gp = nn::layer_norm_backward(gq, b.ln_g->value, c.ln, b.ln_g->grad, b.ln_b->grad);
  Matrix gmid = gy;
  gmid += nn::linear_backward(c.h_mid, b.w1->value, gp, b.w1->grad, &b.b1->grad);
  // Gated attention update.
  Matrix gh = gmid;
  Matrix gu = gmid;
  for (std::size_t i = 0; i < n; ++i) {
    double gg = 0.0;
    for (std::size_t j = 0; j < gu.cols(); ++j) {
      gg += gmid(i, j) * c.u(i, j);
      gu(i, j) *= c.g[i];
    }
    const double gs = gg * c.g[i] * (1.0 - c.g[i]);
    b.gate->grad(0, 0) += gs * mask[i];
    b.gate->grad(0, 1) += gs;
  }
  const Matrix go = nn::linear_backward(c.o, b.wo->value, gu, b.wo->grad);
  const Matrix ga = matmul_nt(go, c.v);
  Matrix gv = matmul_tn(c.attn, go);
  const Matrix ge = nn::softmax_rows_backward(c.attn, ga);
  const double beta = std::exp(b.rho->value(0, 0));
  double gbeta = 0.0;
  Matrix ges(n, 1), ged(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      gbeta -= ge(i, j) * dist(i, j);
      const double graw = ge(i, j) * leaky_grad(c.raw(i, j));
      ges(i, 0) += graw;
      ged(j, 0) += graw;
    }
  b.rho->grad(0, 0) += gbeta * beta;
  if (k == 0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < gv.cols(); ++j) gv(i, j) *= mask[i];
  Matrix gz = gv;
  gz += matmul_nt(ges, b.a_src->value);
  gz += matmul_nt(ged, b.a_dst->value);
  b.a_src->grad += matmul_tn(c.z, ges);
  b.a_dst->grad += matmul_tn(c.z, ged);
  gh += nn::linear_backward(c.h_in, b.wz->value, gz, b.wz->grad);
  return gh;
}

Matrix Harmonizer::patch_forward(const Matrix& patch, const std::vector<double>& mask,
                                 const Matrix& dist, HarmonizerPatchCache& c) const {
  const std::size_t n = patch.rows();
  Matrix h(n, t_ + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < t_; ++j) h(i, j) = patch(i, j);
    h(i, t_) = mask[i];
  }
  for (std::size_t k = 0; k < kHarmonizerBlocks; ++k) h = block_forward(k, h, mask, dist, c.blocks[k]);
  Matrix stream(n, t_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < t_; ++j) stream(i, j) = h(i, j);
  return stream;
}

Matrix Harmonizer::forward(const Matrix& coeffs, const std::vector<double>& mask,
                           const Matrix& dist, HarmonizerCache* cache) const {
  const std::size_t n = coeffs.rows();
  require(n == kNumChannels && mask.size() == n && dist.rows() == n && dist.cols() == n,
          ErrorKind::ShapeError, "harmonizer expects 19 channels, a 19-entry mask and a 19x19 graph");
  require(coeffs.cols() % t_ == 0, ErrorKind::ShapeError,
          "harmonizer input width " + std::to_string(coeffs.cols()) +
              " is not a multiple of the patch length " + std::to_string(t_));
  const std::size_t np = coeffs.cols() / t_;
  Matrix out(n, coeffs.cols());
  HarmonizerPatchCache local;
  if (cache) {
    cache->patches.assign(np, {});
    cache->mask = mask;
  }
  for (std::size_t p = 0; p < np; ++p) {
    Matrix patch(n, t_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t_; ++j) patch(i, j) = coeffs(i, p * t_ + j);
    HarmonizerPatchCache& c = cache ? cache->patches[p] : local;
    const Matrix stream = patch_forward(patch, mask, dist, c);
    const Matrix y = se_forward(se_, stream, &c.se);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t_; ++j) out(i, p * t_ + j) = y(i, j);
  }
  return out;
}

Matrix Harmonizer::backward(const HarmonizerCache& cache, const Matrix& dist,
                            const Matrix& gy) const {
  const std::size_t n = gy.rows();
  const std::size_t np = cache.patches.size();
  require(gy.cols() == np * t_, ErrorKind::ShapeError, "harmonizer gradient width");
  Matrix gx(n, gy.cols());
  for (std::size_t p = 0; p < np; ++p) {
    const HarmonizerPatchCache& c = cache.patches[p];
    Matrix g(n, t_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t_; ++j) g(i, j) = gy(i, p * t_ + j);
    const Matrix gs = se_backward(se_, c.se, g);
    Matrix gh(n, t_ + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t_; ++j) gh(i, j) = gs(i, j);
    for (std::size_t k = kHarmonizerBlocks; k-- > 0;)
      gh = block_backward(k, c.blocks[k], cache.mask, dist, gh);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t_; ++j) gx(i, p * t_ + j) = gh(i, j);
  }
  return gx;
}

Matrix Harmonizer::blocks_forward(const Matrix& patch, const std::vector<double>& mask,
                                  const Matrix& dist) const {
  require(patch.rows() == kNumChannels && patch.cols() == t_ && mask.size() == kNumChannels,
          ErrorKind::ShapeError, "harmonizer patch shape");
  HarmonizerPatchCache c;
  return patch_forward(patch, mask, dist, c);
}

Matrix Harmonizer::attention(const Matrix& patch, const std::vector<double>& mask,
                             const Matrix& dist, std::size_t block) const {
  require(block < kHarmonizerBlocks, ErrorKind::InvalidInput, "block index");
  HarmonizerPatchCache c;
  patch_forward(patch, mask, dist, c);
  return c.blocks[block].attn;
}

namespace {

// Squared error and zero-imputation energy summed over dropped channels.
std::size_t masked_sse(const Matrix& out, const Matrix& clean, const std::vector<double>& mask,
                       double& err, double& base) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    if (mask[i] > 0.0) continue;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double d = out(i, j) - clean(i, j);
      err += d * d;
      base += clean(i, j) * clean(i, j);
      ++count;
    }
  }
  return count;
}

Matrix drop_rows(Matrix m, const std::vector<double>& mask) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (mask[i] == 0.0)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = 0.0;
  return m;
}

}  // namespace

ImputationReport train_imputation(const std::vector<Matrix>& train, const std::vector<Matrix>& test,
                                  std::size_t t, const ImputationConfig& cfg) {
  require(!train.empty() && !test.empty(), ErrorKind::EmptyInput,
          "imputation needs train and test segments");
  Rng rng(cfg.seed);
  Rng init = rng.fork("harmonizer-init");
  Rng drop = rng.fork("harmonizer-dropout");
  ParameterSet ps;
  Harmonizer hz("imp", t, ps, init);
  const Matrix& dist = standard_graph().dist;
  Optimizer opt(OptimizerConfig{cfg.lr, 0.0});

  ImputationReport rep;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ps.zero_grad();
    double loss = 0.0;
    std::size_t count = 0;
    for (const Matrix& x : train) count += x.rows() * x.cols();
    for (const Matrix& x : train) {
      const auto mask = sample_channel_mask(x.rows(), cfg.p_drop, drop);
      HarmonizerCache cache;
      const Matrix y = hz.forward(drop_rows(x, mask), mask, dist, &cache);
      Matrix g = y - x;
      loss += inner(g, g);
      g *= 2.0 / static_cast<double>(count);
      hz.backward(cache, dist, g);
    }
    rep.train_loss.push_back(loss / static_cast<double>(count));
    opt.step(ps, cfg.lr);
  }

  Rng eval = rng.fork("harmonizer-eval");
  double err = 0.0, base = 0.0;
  std::size_t count = 0;
  for (int round = 0; round < 8; ++round)
    for (const Matrix& x : test) {
      const auto mask = sample_channel_mask(x.rows(), cfg.p_drop, eval);
      const Matrix y = hz.forward(drop_rows(x, mask), mask, dist);
      count += masked_sse(y, x, mask, err, base);
    }
  const double denom = static_cast<double>(std::max<std::size_t>(count, 1));
  rep.heldout_mse = err / denom;
  rep.baseline_mse = base / denom;
  return rep;
}

}  // namespace mendr::graph
