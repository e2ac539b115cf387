#include "mendr/model/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mendr/error.hpp"
#include "mendr/simd/kernels.hpp"

namespace mendr::nn {

Matrix linear(const Matrix& x, const Matrix& w, const Matrix* b) {
  Matrix y = matmul(x, w);
  if (b) {
    require(b->rows() == 1 && b->cols() == y.cols(), ErrorKind::ShapeError, "linear: bias shape");
    for (std::size_t r = 0; r < y.rows(); ++r)
      simd::active().axpy(1.0, b->data(), y.ptr(r, 0), y.cols());
  }
  return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& gy, Matrix& gw,
                       Matrix* gb) {
  gw += matmul_tn(x, gy);
  if (gb)
    for (std::size_t r = 0; r < gy.rows(); ++r)
      simd::active().axpy(1.0, gy.ptr(r, 0), gb->data(), gy.cols());
  return matmul_nt(gy, w);
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& cache) {
  const std::size_t n = x.rows(), d = x.cols();
  require(gamma.cols() == d && beta.cols() == d, ErrorKind::ShapeError, "layer_norm: affine shape");
  cache.xhat = Matrix(n, d);
  cache.rstd.assign(n, 0.0);
  Matrix y(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += x(r, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kNormEps);
    cache.rstd[r] = rstd;
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (x(r, c) - mean) * rstd;
      cache.xhat(r, c) = xh;
      y(r, c) = xh * gamma(0, c) + beta(0, c);
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& gy, const Matrix& gamma, const LayerNormCache& cache,
                           Matrix& ggamma, Matrix& gbeta) {
  const std::size_t n = gy.rows(), d = gy.cols();
  Matrix gx(n, d);
  std::vector<double> gxh(d);
  for (std::size_t r = 0; r < n; ++r) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ggamma(0, c) += gy(r, c) * cache.xhat(r, c);
      gbeta(0, c) += gy(r, c);
      gxh[c] = gy(r, c) * gamma(0, c);
      s1 += gxh[c];
      s2 += gxh[c] * cache.xhat(r, c);
    }
    s1 /= static_cast<double>(d);
    s2 /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c)
      gx(r, c) = cache.rstd[r] * (gxh[c] - s1 - cache.xhat(r, c) * s2);
  }
  return gx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix gelu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = gelu(v);
  return y;
}

Matrix gelu_backward(const Matrix& x, const Matrix& gy) {
  Matrix g = gy;
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= gelu_grad(x.data()[i]);
  return g;
}

void gelu_inplace(Tensor3& t) {
  for (double& v : t.data) v = gelu(v);
}

void gelu_backward_inplace(const Tensor3& pre, Tensor3& g) {
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= gelu_grad(pre.data[i]);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      y(r, c) = std::exp(x(r, c) - mx);
      s += y(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) /= s;
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& gy) {
  Matrix gx(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * gy(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) = y(r, c) * (gy(r, c) - dot);
  }
  return gx;
}

Tensor3 group_norm(const Tensor3& x, std::size_t groups, const Matrix& gamma, const Matrix& beta,
                   GroupNormCache& cache) {
  require(groups > 0 && x.c % groups == 0, ErrorKind::ShapeError, "group_norm: groups");
  require(gamma.cols() == x.c && beta.cols() == x.c, ErrorKind::ShapeError,
          "group_norm: affine shape");
  const std::size_t per = x.c / groups;
  const std::size_t plane = x.h * x.w;
  const std::size_t count = per * plane;
  cache.xhat = Tensor3(x.c, x.h, x.w);
  cache.rstd.assign(groups, 0.0);
  Tensor3 y(x.c, x.h, x.w);
  for (std::size_t g = 0; g < groups; ++g) {
    const double* src = x.plane(g * per);
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += src[i];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(count);
    const double rstd = 1.0 / std::sqrt(var + kNormEps);
    cache.rstd[g] = rstd;
    for (std::size_t ch = g * per; ch < (g + 1) * per; ++ch) {
      const double* xs = x.plane(ch);
      double* xh = cache.xhat.plane(ch);
      double* ys = y.plane(ch);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (xs[i] - mean) * rstd;
        ys[i] = xh[i] * gamma(0, ch) + beta(0, ch);
      }
    }
  }
  return y;
}

Tensor3 group_norm_backward(const Tensor3& gy, std::size_t groups, const Matrix& gamma,
                            const GroupNormCache& cache, Matrix& ggamma, Matrix& gbeta) {
  const std::size_t per = gy.c / groups;
  const std::size_t plane = gy.h * gy.w;
  const double count = static_cast<double>(per * plane);
  Tensor3 gx(gy.c, gy.h, gy.w);
  for (std::size_t g = 0; g < groups; ++g) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t ch = g * per; ch < (g + 1) * per; ++ch) {
      const double* gys = gy.plane(ch);
      const double* xh = cache.xhat.plane(ch);
      for (std::size_t i = 0; i < plane; ++i) {
        ggamma(0, ch) += gys[i] * xh[i];
        gbeta(0, ch) += gys[i];
        const double gxh = gys[i] * gamma(0, ch);
        s1 += gxh;
        s2 += gxh * xh[i];
      }
    }
    s1 /= count;
    s2 /= count;
    for (std::size_t ch = g * per; ch < (g + 1) * per; ++ch) {
      const double* gys = gy.plane(ch);
      const double* xh = cache.xhat.plane(ch);
      double* gxs = gx.plane(ch);
      for (std::size_t i = 0; i < plane; ++i)
        gxs[i] = cache.rstd[g] * (gys[i] * gamma(0, ch) - s1 - xh[i] * s2);
    }
  }
  return gx;
}

Tensor3 conv_stride(const Tensor3& x, const Matrix& w, std::size_t k) {
  require(k > 0 && x.w % k == 0, ErrorKind::ShapeError, "conv_stride: length not divisible");
  require(w.cols() == x.c * k, ErrorKind::ShapeError, "conv_stride: weight shape");
  const std::size_t c_out = w.rows(), len = x.w / k;
  Tensor3 y(c_out, x.h, len);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t i = 0; i < x.c; ++i)
      for (std::size_t r = 0; r < x.h; ++r) {
        const double* src = &x.data[(i * x.h + r) * x.w];
        double* dst = &y.data[(o * x.h + r) * len];
        for (std::size_t u = 0; u < k; ++u) {
          const double wv = w(o, i * k + u);
          if (wv == 0.0) continue;
          for (std::size_t t = 0; t < len; ++t) dst[t] += wv * src[t * k + u];
        }
      }
  return y;
}

Tensor3 conv_stride_backward(const Tensor3& x, const Matrix& w, std::size_t k, const Tensor3& gy,
                             Matrix& gw) {
  const std::size_t len = x.w / k;
  Tensor3 gx(x.c, x.h, x.w);
  for (std::size_t o = 0; o < w.rows(); ++o)
    for (std::size_t i = 0; i < x.c; ++i)
      for (std::size_t r = 0; r < x.h; ++r) {
        const double* src = &x.data[(i * x.h + r) * x.w];
        const double* g = &gy.data[(o * x.h + r) * len];
        double* gxs = &gx.data[(i * x.h + r) * x.w];
        for (std::size_t u = 0; u < k; ++u) {
          const double wv = w(o, i * k + u);
          double acc = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            acc += g[t] * src[t * k + u];
            gxs[t * k + u] += wv * g[t];
          }
          gw(o, i * k + u) += acc;
        }
      }
  return gx;
}

Tensor3 conv_transpose_stride(const Tensor3& x, const Matrix& w, std::size_t k) {
  require(k > 0 && w.rows() == x.c && w.cols() % k == 0, ErrorKind::ShapeError,
          "conv_transpose_stride: weight shape");
  const std::size_t c_out = w.cols() / k, len = x.w * k;
  Tensor3 y(c_out, x.h, len);
  for (std::size_t i = 0; i < x.c; ++i)
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t r = 0; r < x.h; ++r) {
        const double* src = &x.data[(i * x.h + r) * x.w];
        double* dst = &y.data[(o * x.h + r) * len];
        for (std::size_t u = 0; u < k; ++u) {
          const double wv = w(i, o * k + u);
          if (wv == 0.0) continue;
          for (std::size_t t = 0; t < x.w; ++t) dst[t * k + u] += wv * src[t];
        }
      }
  return y;
}

Tensor3 conv_transpose_stride_backward(const Tensor3& x, const Matrix& w, std::size_t k,
                                       const Tensor3& gy, Matrix& gw) {
  const std::size_t c_out = w.cols() / k, len = x.w * k;
  Tensor3 gx(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.c; ++i)
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t r = 0; r < x.h; ++r) {
        const double* src = &x.data[(i * x.h + r) * x.w];
        const double* g = &gy.data[(o * x.h + r) * len];
        double* gxs = &gx.data[(i * x.h + r) * x.w];
        for (std::size_t u = 0; u < k; ++u) {
          const double wv = w(i, o * k + u);
          double acc = 0.0;
          for (std::size_t t = 0; t < x.w; ++t) {
            acc += g[t * k + u] * src[t];
            gxs[t] += wv * g[t * k + u];
          }
          gw(i, o * k + u) += acc;
        }
      }
  return gx;
}

}  // namespace mendr::nn
