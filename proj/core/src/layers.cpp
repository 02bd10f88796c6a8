#include "cost/layers.hpp"

#include <cmath>

namespace cost {

std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Tensor dropout(const Tensor& x, double p, const ForwardContext& ctx) {
  if (!ctx.training || p <= 0.0 || ctx.rng == nullptr) return x;
  std::vector<double> mask(x.numel());
  const double keep = 1.0 - p;
  for (double& m : mask) m = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(xavier_uniform({in, out}, in, out, rng)) {
  if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t width, double eps_)
    : gamma(Tensor::full({width}, 1.0, true)), beta(Tensor::zeros({width}, true)), eps(eps_) {}

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride_,
               std::size_t padding_, Rng& rng)
    : weight(xavier_uniform({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel,
                            out_channels * kernel * kernel, rng)),
      bias(Tensor::zeros({out_channels}, true)),
      stride(stride_),
      padding(padding_) {}

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

}  // namespace cost
