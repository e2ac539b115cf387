#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mendr/linalg/matrix.hpp"

namespace mendr {

enum class ParamGroup { euclidean, stiefel, cholesky };

std::string_view to_string(ParamGroup g) noexcept;
ParamGroup param_group_from_string(std::string_view s);

// A learnable tensor with its gradient accumulator and optimizer moments.
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::euclidean;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  bool trainable = true;

  void zero_grad() { grad.set_zero(); }
};

// Owns parameters in registration order; references stay valid.
class ParameterSet {
 public:
  Parameter& add(std::string name, ParamGroup group, Matrix init);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  // Marks every parameter whose name starts with prefix.
  void set_trainable(std::string_view prefix, bool trainable);
  void set_all_trainable(bool trainable);
  double grad_norm() const;  // over trainable parameters
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

struct OptimizerConfig {
  double lr = 1e-3;
  double weight_decay = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 1e7;  // global gradient-norm clip
};

// AdamW on euclidean and cholesky parameters, projected gradient descent
// with QR retraction on stiefel parameters. Frozen parameters are skipped.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  // One update at learning rate lr. Returns the pre-clip gradient norm.
  double step(ParameterSet& params, double lr);

  std::size_t steps_taken() const noexcept { return t_; }
  const OptimizerConfig& config() const noexcept { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::size_t t_ = 0;
};

// Cosine annealing from base to eta_min over period epochs.
double cosine_lr(double base, double eta_min, std::size_t epoch, std::size_t period);

}  // namespace mendr
