#pragma once

#include <cstdint>

#include "cost/cvlf.hpp"
#include "cost/head.hpp"
#include "cost/linguistic.hpp"
#include "cost/visual.hpp"

namespace cost {

struct ModelConfig {
  VisualConfig visual;
  LinguisticConfig linguistic;
  FusionConfig fusion;
  std::uint64_t init_seed = 1;

  /// Search 128 / template 64, width 64, S = 2, L = 2, 100 + 20 + 1 = 121 fused tokens.
  static ModelConfig desk();
  /// Full-size shapes: 1024 search tokens, 400 visual + 40 language + 1 = 441 fused tokens.
  static ModelConfig paper();

  std::size_t fused_length() const {
    return visual.output_tokens() + linguistic.sequence_length() + 1;
  }
  void validate() const;
};

/// Everything the head sees for one (search, template, description) sample.
struct ModelOutput {
  Tensor visual_features;    ///< F^v_0, [N_v' x C_v']
  Tensor language_features;  ///< F^l_0, [N_l x C_l]
  FusedTokens fused;
  HeadOutput head;
};

class CostModel {
 public:
  explicit CostModel(const ModelConfig& config);

  /// Language features; zeros when use_language is false.
  Tensor language_features(const LanguageTokens& tokens, bool use_language, const ForwardContext& ctx) const;

  ModelOutput forward(const ImageTensor& search, const Tensor& template_tokens, const Tensor& language_features,
                      const ForwardContext& ctx) const;

  ParameterList parameters() const;
  /// Parameters on the inference path (excludes the CoA projections).
  ParameterList inference_parameters() const;

  ModelConfig config;
  VisualBranch visual;
  LinguisticBranch linguistic;
  ContrastiveProjection projection;
  FusionTransformer fusion;
  TrackingHead head;
};

}  // namespace cost
