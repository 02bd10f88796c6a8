#pragma once

#include <string>
#include <vector>

#include "cost/ops.hpp"
#include "cost/rng.hpp"
#include "cost/tensor.hpp"

namespace cost {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParameterList& params);

/// Per-call forward settings. `rng` may be null when training is false.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;

  static ForwardContext eval() { return {}; }
};

/// Inverted dropout; identity outside training or when p == 0.
Tensor dropout(const Tensor& x, double p, const ForwardContext& ctx);

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

/// y = x W + b with W stored [in x out].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor weight;
  Tensor bias;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width, double eps = 1e-5);

  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding, Rng& rng);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

}  // namespace cost
