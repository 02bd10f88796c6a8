#pragma once

#include <span>
#include <string>
#include <vector>

#include "cost/crop.hpp"
#include "cost/dataset.hpp"
#include "cost/model.hpp"

namespace cost {

struct RuntimeConfig {
  double search_scale = 4.0;
  double template_scale = 2.0;
  std::size_t search_resize = 128;
  std::size_t template_resize = 64;
  std::size_t window_side = 11;
  double window_weight = 0.49;  ///< lambda_w
  bool use_language = true;

  /// Sizes and window side matched to a model configuration.
  static RuntimeConfig for_model(const ModelConfig& model);
  /// Throws std::invalid_argument if the scales are <= 1, the resizes differ
  /// from the model's, or window_side^2 != fused length.
  void validate(const ModelConfig& model) const;
};

/// Raised-cosine window w[n] = 0.5 (1 - cos(2 pi n / (M - 1))); the 2-D
/// window is the outer product, row-major.
std::vector<double> hanning_window(std::size_t side);
/// (1 - lambda_w) * conf + lambda_w * window over candidates in token order.
/// Throws std::invalid_argument if conf.size() != window_side^2.
std::vector<double> hanning_penalize(std::span<const double> confidence, const RuntimeConfig& config);

/// Single-sequence online tracker over a frozen model.
class Tracker {
 public:
  Tracker(const CostModel& model, RuntimeConfig config);

  /// Caches template and language features. Returns the initial box.
  BoundingBox initialize(const RgbImage& frame, const BoundingBox& box, const std::string& description);
  /// One local-search step around the previous box.
  BoundingBox track(const RgbImage& frame);

  const BoundingBox& box() const { return previous_; }
  /// Sum of the cached template and language features, for immutability checks.
  double feature_checksum() const;
  const RuntimeConfig& config() const { return config_; }

 private:
  const CostModel& model_;
  RuntimeConfig config_;
  std::vector<double> window_;
  Tensor template_tokens_;
  Tensor language_;
  BoundingBox previous_;
  bool initialized_ = false;
};

/// Tracks a whole sequence from its first-frame box; frame 0 yields that box.
std::vector<BoundingBox> track_sequence(const CostModel& model, const RuntimeConfig& config,
                                        const SequenceAnnotation& seq);

}  // namespace cost
