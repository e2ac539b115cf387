#include "mendr/autodiff/params.hpp"

#include <cmath>
#include <numbers>

#include "mendr/autodiff/manifold_params.hpp"
#include "mendr/error.hpp"

namespace mendr {

std::string_view to_string(ParamGroup g) noexcept {
  switch (g) {
    case ParamGroup::euclidean:
      return "euclidean";
    case ParamGroup::stiefel:
      return "stiefel";
    case ParamGroup::cholesky:
      return "cholesky";
  }
  return "?";
}

ParamGroup param_group_from_string(std::string_view s) {
  if (s == "euclidean") return ParamGroup::euclidean;
  if (s == "stiefel") return ParamGroup::stiefel;
  if (s == "cholesky") return ParamGroup::cholesky;
  fail(ErrorKind::InvalidInput, "unknown parameter group " + std::string(s));
}

Parameter& ParameterSet::add(std::string name, ParamGroup group, Matrix init) {
  require(find(name) == nullptr, ErrorKind::InvalidInput, "duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->group = group;
  p->grad = Matrix(init.rows(), init.cols());
  p->m = Matrix(init.rows(), init.cols());
  p->v = Matrix(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::at(std::string_view name) {
  Parameter* p = find(name);
  require(p != nullptr, ErrorKind::InvalidInput, "no parameter named " + std::string(name));
  return *p;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterSet::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& p : params_)
    if (std::string_view(p->name).starts_with(prefix)) p->trainable = trainable;
}

void ParameterSet::set_all_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    if (p->trainable) s += inner(p->grad, p->grad);
  return std::sqrt(s);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

double Optimizer::step(ParameterSet& params, double lr) {
  ++t_;
  const double norm = params.grad_norm();
  require(std::isfinite(norm), ErrorKind::DegenerateStep, "non-finite gradient norm");
  const double scale = norm > cfg_.clip ? cfg_.clip / norm : 1.0;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    if (p.group == ParamGroup::stiefel) {
      Matrix g = p.grad * scale;
      p.value = stiefel_retract(p.value, lr, stiefel_grad(p.value, g));
#ifndef NDEBUG
      require(orthonormality_error(p.value) < 1e-8, ErrorKind::DegenerateStep,
              "stiefel parameter " + p.name + " left the manifold");
#endif
      continue;
    }
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double gk = g[k] * scale;
      w[k] -= lr * cfg_.weight_decay * w[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
    }
    if (p.group == ParamGroup::cholesky) cholesky_rejitter(p.value);
  }
  return norm;
}

double cosine_lr(double base, double eta_min, std::size_t epoch, std::size_t period) {
  if (period == 0) return base;
  const double frac = static_cast<double>(std::min(epoch, period)) / static_cast<double>(period);
  return eta_min + (base - eta_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace mendr
