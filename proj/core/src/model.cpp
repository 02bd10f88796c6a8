#include "cost/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cost {

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.visual = VisualConfig{};
  c.linguistic = LinguisticConfig{};
  c.fusion = FusionConfig{};
  return c;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.visual = VisualConfig::paper();
  c.linguistic = LinguisticConfig::paper();
  c.fusion = FusionConfig::paper();
  return c;
}

void ModelConfig::validate() const {
  visual.validate();
  linguistic.validate();
  fusion.validate();
  const std::size_t total = fused_length();
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(total))));
  if (side * side != total)
    throw std::invalid_argument("model config: fused length " + std::to_string(visual.output_tokens()) + " + " +
                                std::to_string(linguistic.sequence_length()) + " + 1 = " + std::to_string(total) +
                                " is not a perfect square, so no square window can cover the candidates");
}

CostModel::CostModel(const ModelConfig& config_) : config(config_) {
  config.validate();
  Rng rng(config.init_seed);
  visual = VisualBranch(config.visual, rng);
  linguistic = LinguisticBranch(config.linguistic, rng);
  projection = ContrastiveProjection(config.visual.stem_channels, config.linguistic.width, config.fusion.width, rng);
  fusion = FusionTransformer(config.fusion, config.visual.stem_channels, config.linguistic.width,
                             visual_token_centers(config.visual), config.linguistic.sequence_length(), rng);
  head = TrackingHead(config.fusion.width, rng);
}

Tensor CostModel::language_features(const LanguageTokens& tokens, bool use_language, const ForwardContext& ctx) const {
  if (!use_language) return Tensor::zeros({config.linguistic.sequence_length(), config.linguistic.width});
  return linguistic.forward(tokens, ctx);
}

ModelOutput CostModel::forward(const ImageTensor& search, const Tensor& template_tokens,
                               const Tensor& language_features, const ForwardContext& ctx) const {
  ModelOutput out;
  out.visual_features = visual.forward(search, template_tokens, ctx);
  out.language_features = language_features;
  out.fused = fusion.fuse(out.visual_features, language_features, ctx);
  out.head = head.forward(out.fused);
  return out;
}

ParameterList CostModel::parameters() const {
  ParameterList out = inference_parameters();
  projection.collect("coa", out);
  return out;
}

ParameterList CostModel::inference_parameters() const {
  ParameterList out;
  visual.collect("visual", out);
  linguistic.collect("linguistic", out);
  fusion.collect("fusion", out);
  head.collect("head", out);
  return out;
}

}  // namespace cost
