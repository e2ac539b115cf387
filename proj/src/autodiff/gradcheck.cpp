#include "mendr/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/autodiff/spectral.hpp"
#include "mendr/error.hpp"
#include "mendr/rng.hpp"
#include "mendr/ssl/losses.hpp"

namespace mendr {

namespace {

using Loss = std::function<double(const Matrix&)>;

Matrix gaussian(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Matrix orthogonal(std::size_t n, Rng& rng) { return orthonormalize_rows(gaussian(n, n, rng)); }

// Q diag(d) Q^T with ascending gaps of at least min_gap.
Matrix spd_with_gap(std::size_t n, double min_gap, Rng& rng) {
  std::vector<double> d(n);
  double v = rng.uniform(0.2, 0.5);
  for (auto& x : d) {
    x = v;
    v += min_gap + rng.uniform(0.0, 0.5);
  }
  return symmetrized(congruence_diag(orthogonal(n, rng).transposed(), d));
}

Matrix fd(const Loss& f, const Matrix& m, double h) {
  Matrix g(m.rows(), m.cols());
  Matrix x = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double fp = f(x);
    x.data()[i] = orig - h;
    const double fm = f(x);
    x.data()[i] = orig;
    g.data()[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Symmetric perturbations; off-diagonal entries halved to compare with a
// symmetrized gradient.
Matrix fd_sym(const Loss& f, const Matrix& a, double h) {
  const std::size_t n = a.rows();
  Matrix g(n, n);
  Matrix x = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double orig = x(i, j);
      x(i, j) = x(j, i) = orig + h;
      const double fp = f(x);
      x(i, j) = x(j, i) = orig - h;
      const double fm = f(x);
      x(i, j) = x(j, i) = orig;
      const double d = (fp - fm) / (2 * h);
      g(i, j) = g(j, i) = i == j ? d : 0.5 * d;
    }
  return g;
}

double rel_error(const Matrix& analytic, const Matrix& numeric) {
  const double den = std::max({frobenius_norm(numeric), frobenius_norm(analytic), 1e-8});
  return frobenius_norm(analytic - numeric) / den;
}

struct Tally {
  GradcheckResult r;
  const GradcheckOptions& opt;

  void add(const Matrix& analytic, const Matrix& numeric) {
    ++r.cases;
    if (!all_finite(analytic)) {
      r.finite = false;
      ++r.failed;
      return;
    }
    const double e = rel_error(analytic, numeric);
    r.max_rel_error = std::max(r.max_rel_error, e);
    if (!(e < opt.tol)) ++r.failed;
  }
  void add_finite(const Matrix& g) {
    ++r.cases;
    if (!all_finite(g)) {
      r.finite = false;
      ++r.failed;
    }
  }
};

SymmetricMatrix eig_grad(const EigenDecomposition& e, const std::vector<double>& gl, const Matrix& gu,
                         const GradcheckOptions& opt) {
  if (!opt.negate_coupling) return eig_backward(e, gl, gu);
  const StabilizationConfig cfg;
  return eig_backward_with_coupling(e, gl, gu, eig_coupling(e.values, cfg) * -1.0, cfg);
}

void spd_suite(const GradcheckOptions& opt, std::vector<GradcheckResult>& out) {
  Rng rng = Rng(opt.seed).fork("gradcheck.spd");
  Tally eig{{"spd", "eig_backward"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t n = 3 + t % 4;
    const Matrix a = spd_with_gap(n, opt.min_gap, rng);
    std::vector<double> c(n);
    for (double& v : c) v = rng.normal();
    const Matrix cu = gaussian(n, n, rng);
    // Eigenvectors enter through <C, U>; sign-canonical vectors keep this smooth.
    const Loss loss = [&](const Matrix& x) {
      const auto e = sym_eig(SymmetricMatrix(x));
      double s = inner(cu, e.vectors);
      for (std::size_t i = 0; i < n; ++i) s += c[i] * e.values[i];
      return s;
    };
    const auto e = sym_eig(SymmetricMatrix(a));
    eig.add(eig_grad(e, c, cu, opt).matrix(), fd_sym(loss, a, opt.h));
  }
  out.push_back(eig.r);

  Tally lg{{"spd", "spd_log_backward"}, opt};
  Tally ex{{"spd", "spd_exp_backward"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t n = 3 + t % 5;
    const Matrix a = spd_with_gap(n, opt.min_gap, rng);
    const Matrix c = symmetrized(gaussian(n, n, rng));
    const Loss log_loss = [&](const Matrix& x) { return inner(c, spd_log(SpdMatrix(x)).matrix()); };
    lg.add(spd_log_backward(SpdMatrix(a), SymmetricMatrix(c)).matrix(), fd_sym(log_loss, a, opt.h));
    const Matrix s = a - Matrix::identity(n);
    const Loss exp_loss = [&](const Matrix& x) { return inner(c, spd_exp(SymmetricMatrix(x)).matrix()); };
    ex.add(spd_exp_backward(SymmetricMatrix(s), SymmetricMatrix(c)).matrix(), fd_sym(exp_loss, s, opt.h));
  }
  out.push_back(lg.r);
  out.push_back(ex.r);

  // Repeated and nearly repeated eigenvalues: only finiteness is required.
  Tally deg{{"spd", "degenerate_stress"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t n = 4 + t % 3;
    const double gaps[] = {0.0, 1e-15, 1e-12, 1e-9};
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + 0.5 * static_cast<double>(i / 2);
    for (std::size_t i = 1; i < n; i += 2) d[i] += gaps[t % 4];
    const Matrix a = symmetrized(congruence_diag(orthogonal(n, rng).transposed(), d));
    const auto e = sym_eig(SymmetricMatrix(a));
    std::vector<double> gl(n, 1.0);
    deg.add_finite(eig_grad(e, gl, gaussian(n, n, rng), opt).matrix());
    const Matrix c = symmetrized(gaussian(n, n, rng));
    deg.add_finite(spd_log_backward(SpdMatrix(a), SymmetricMatrix(c)).matrix());
    deg.add_finite(spd_exp_backward(SymmetricMatrix(a), SymmetricMatrix(c)).matrix());
  }
  const auto id = sym_eig(SymmetricMatrix(Matrix::identity(5)));
  deg.add_finite(eig_grad(id, std::vector<double>(5, 0.5), gaussian(5, 5, rng), opt).matrix());
  out.push_back(deg.r);
}

void stiefel_suite(const GradcheckOptions& opt, std::vector<GradcheckResult>& out) {
  Rng rng = Rng(opt.seed).fork("gradcheck.stiefel");
  Tally bw{{"stiefel", "bimap_backward_w"}, opt};
  Tally ba{{"stiefel", "bimap_backward_a"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t din = 4 + t % 4, dout = 2 + t % 3;
    const Matrix w = stiefel_init(dout, din, rng);
    const Matrix a = spd_with_gap(din, opt.min_gap, rng);
    const Matrix c = gaussian(dout, dout, rng);
    const auto g = bimap_backward(w, a, c);
    bw.add(g.grad_w, fd([&](const Matrix& x) { return inner(c, bimap(x, a)); }, w, opt.h));
    ba.add(g.grad_a, fd([&](const Matrix& x) { return inner(c, bimap(w, x)); }, a, opt.h));
  }
  out.push_back(bw.r);
  out.push_back(ba.r);

  // Projected gradients must be tangent and retractions orthonormal.
  GradcheckResult tr{"stiefel", "tangent_and_retraction"};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const Matrix w = stiefel_init(3 + t % 3, 7, rng);
    const Matrix g = stiefel_grad(w, gaussian(w.rows(), w.cols(), rng));
    const Matrix tangency = symmetrized(matmul_nt(w, g));
    const Matrix w2 = stiefel_retract(w, 0.1, g);
    const double err = std::max(max_abs(tangency), orthonormality_error(w2));
    tr.max_rel_error = std::max(tr.max_rel_error, err);
    ++tr.cases;
    if (!(err < 1e-9)) ++tr.failed;
  }
  out.push_back(tr);
}

void cholesky_suite(const GradcheckOptions& opt, std::vector<GradcheckResult>& out) {
  Rng rng = Rng(opt.seed).fork("gradcheck.cholesky");
  Tally ch{{"cholesky", "cholesky_param_grad"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t n = 2 + t % 6;
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) l(i, j) = i == j ? rng.uniform(0.5, 2.0) : rng.normal(0, 0.5);
    const Matrix c = symmetrized(gaussian(n, n, rng));
    // Loss through log M to exercise the path used by the mask embedding.
    const Loss loss = [&](const Matrix& x) {
      return inner(c, spd_log(SpdMatrix(cholesky_product(x))).matrix());
    };
    const auto e = sym_eig(SymmetricMatrix(cholesky_product(l)));
    const Matrix gm = spectral_backward(e, SpectralFn::log, c);
    Matrix analytic = cholesky_param_grad(l, gm);
    Matrix numeric = fd(loss, l, opt.h);
    // Only the lower triangle is a parameter.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) analytic(i, j) = numeric(i, j) = 0.0;
    ch.add(analytic, numeric);
  }
  out.push_back(ch.r);
}

void losses_suite(const GradcheckOptions& opt, std::vector<GradcheckResult>& out) {
  Rng rng = Rng(opt.seed).fork("gradcheck.losses");
  Tally mae{{"losses", "mae_loss_logs"}, opt};
  Tally loo{{"losses", "loo_loss"}, opt};
  Tally tau{{"losses", "loo_loss_tau"}, opt};
  for (std::size_t t = 0; t < opt.cases; ++t) {
    const std::size_t n = 5 + t % 6, d = 3;
    std::vector<Matrix> orig, pred;
    for (std::size_t p = 0; p < n; ++p) {
      orig.push_back(symmetrized(gaussian(d, d, rng)) * 0.5);
      pred.push_back(symmetrized(gaussian(d, d, rng)) * 0.5);
    }
    const auto plan = ssl::sample_mask(n, rng, 0.4);
    std::vector<Matrix> g;
    ssl::mae_loss_logs(orig, pred, plan, &g);
    const std::size_t q = rng.uniform_index(n);
    const Loss f = [&](const Matrix& x) {
      auto p2 = pred;
      p2[q] = symmetrized(x);
      return ssl::mae_loss_logs(orig, p2, plan);
    };
    mae.add(g[q], fd_sym(f, pred[q], opt.h));

    const std::size_t nb = 2 + t % 3;
    std::vector<std::vector<Matrix>> logs(nb);
    for (auto& b : logs)
      for (std::size_t p = 0; p < n; ++p) b.push_back(symmetrized(gaussian(d, d, rng)) * 0.5);
    const auto neg = ssl::sample_negatives(n, 3, rng);
    const double t0 = rng.uniform(-0.5, 1.5);
    ssl::LooGrads lg;
    ssl::loo_loss(logs, neg, t0, &lg);
    const std::size_t b = rng.uniform_index(nb), p = rng.uniform_index(n);
    const Loss fl = [&](const Matrix& x) {
      auto l2 = logs;
      l2[b][p] = x;
      return ssl::loo_loss(l2, neg, t0);
    };
    loo.add(lg.logs[b][p], fd(fl, logs[b][p], opt.h));
    const Loss ft = [&](const Matrix& x) { return ssl::loo_loss(logs, neg, x(0, 0)); };
    tau.add(Matrix(1, 1, lg.tau), fd(ft, Matrix(1, 1, t0), opt.h));
  }
  out.push_back(mae.r);
  out.push_back(loo.r);
  out.push_back(tau.r);
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(std::string_view module, const GradcheckOptions& opt) {
  const bool all = module == "all";
  require(all || module == "spd" || module == "stiefel" || module == "cholesky" || module == "losses",
          ErrorKind::InvalidInput, "unknown gradcheck module: " + std::string(module));
  std::vector<GradcheckResult> out;
  if (all || module == "spd") spd_suite(opt, out);
  if (all || module == "stiefel") stiefel_suite(opt, out);
  if (all || module == "cholesky") cholesky_suite(opt, out);
  if (all || module == "losses") losses_suite(opt, out);
  return out;
}

bool all_passed(const std::vector<GradcheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const GradcheckResult& r) { return r.passed(); });
}

}  // namespace mendr
