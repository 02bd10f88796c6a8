#pragma once

#include <cstdint>
#include <vector>

#include "cost/tensor.hpp"

namespace cost {

struct AdamWOptions {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  /// Applies one update from the gradients currently held by the parameters.
  /// A non-finite gradient aborts the whole step (no parameter is touched).
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace cost
