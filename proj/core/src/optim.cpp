#include "cost/optim.hpp"

#include <cmath>
#include <string>

namespace cost {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options) : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    if (!p.requires_grad()) throw std::invalid_argument("AdamW: parameter does not require grad");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    for (double g : params_[i].grad())
      if (!std::isfinite(g))
        throw NumericError("AdamW: non-finite gradient in parameter " + std::to_string(i) + " of shape " +
                           shape_str(params_[i].shape()) + "; step aborted");
  }
  ++step_;
  const auto& o = options_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  const double decay = 1.0 - o.learning_rate * o.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const bool has_grad = p.has_grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = has_grad ? p.grad()[j] : 0.0;
      w[j] *= decay;
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-12);
    for (auto p : params)
      if (p.has_grad())
        for (double& g : p.mutable_grad()) g *= scale;
  }
  return norm;
}

}  // namespace cost
