#include "cost/tracker.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace cost {

RuntimeConfig RuntimeConfig::for_model(const ModelConfig& model) {
  RuntimeConfig c;
  c.search_resize = model.visual.search_size;
  c.template_resize = model.visual.template_size;
  c.window_side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(model.fused_length()))));
  return c;
}

void RuntimeConfig::validate(const ModelConfig& model) const {
  if (!(search_scale > 1.0) || !(template_scale > 1.0))
    throw std::invalid_argument("runtime config: crop scales must exceed 1");
  if (search_resize != model.visual.search_size || template_resize != model.visual.template_size)
    throw std::invalid_argument("runtime config: crop sizes " + std::to_string(search_resize) + "/" +
                                std::to_string(template_resize) + " differ from the model's " +
                                std::to_string(model.visual.search_size) + "/" +
                                std::to_string(model.visual.template_size));
  if (window_side * window_side != model.fused_length())
    throw std::invalid_argument("runtime config: window side " + std::to_string(window_side) + " squared is not the " +
                                std::to_string(model.fused_length()) + " fused candidates");
  if (window_weight < 0.0 || window_weight > 1.0) throw std::invalid_argument("runtime config: window_weight must lie in [0, 1]");
}

std::vector<double> hanning_window(std::size_t side) {
  std::vector<double> w1(side, 1.0);
  if (side > 1)
    for (std::size_t n = 0; n < side; ++n)
      w1[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(side - 1)));
  std::vector<double> out(side * side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) out[r * side + c] = w1[r] * w1[c];
  return out;
}

std::vector<double> hanning_penalize(std::span<const double> confidence, const RuntimeConfig& config) {
  if (confidence.size() != config.window_side * config.window_side)
    throw std::invalid_argument("hanning_penalize: " + std::to_string(confidence.size()) + " candidates for a " +
                                std::to_string(config.window_side) + "x" + std::to_string(config.window_side) +
                                " window");
  const auto window = hanning_window(config.window_side);
  std::vector<double> out(confidence.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - config.window_weight) * confidence[i] + config.window_weight * window[i];
  return out;
}

Tracker::Tracker(const CostModel& model, RuntimeConfig config) : model_(model), config_(config) {
  config_.validate(model.config);
  window_ = hanning_window(config_.window_side);
}

BoundingBox Tracker::initialize(const RgbImage& frame, const BoundingBox& box, const std::string& description) {
  NoGradGuard no_grad;
  const auto ctx = ForwardContext::eval();
  const RegionCrop crop = crop_region(frame, box, config_.template_scale, config_.template_resize);
  template_tokens_ = model_.visual.stem_tokens(crop.image).detach();
  const LanguageTokens tokens = tokenize(description, model_.config.linguistic);
  language_ = model_.language_features(tokens, config_.use_language, ctx).detach();
  previous_ = box;
  initialized_ = true;
  return box;
}

BoundingBox Tracker::track(const RgbImage& frame) {
  if (!initialized_) throw std::logic_error("Tracker::track before initialize");
  NoGradGuard no_grad;
  const RegionCrop crop = crop_region(frame, previous_, config_.search_scale, config_.search_resize);
  const ModelOutput out = model_.forward(crop.image, template_tokens_, language_, ForwardContext::eval());
  const auto conf = out.head.confidence.data();
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const double score = (1.0 - config_.window_weight) * conf[i] + config_.window_weight * window_[i];
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  BoundingBox b = out.head.box(best);
  const double px = static_cast<double>(config_.search_resize);
  b = crop.transform.to_frame({b.x * px, b.y * px, b.w * px, b.h * px});
  if (!b.valid() || b.empty()) {
    spdlog::warn("tracker: degenerate prediction at candidate {}; keeping the previous box", best);
    return previous_;
  }
  previous_ = b;
  return b;
}

double Tracker::feature_checksum() const {
  double s = 0.0;
  for (double v : template_tokens_.data()) s += v;
  for (double v : language_.data()) s += v;
  return s;
}

std::vector<BoundingBox> track_sequence(const CostModel& model, const RuntimeConfig& config,
                                        const SequenceAnnotation& seq) {
  std::vector<BoundingBox> out(seq.size());
  std::size_t start = 0;
  while (start < seq.size() && (!seq.visible(start) || seq.boxes[start].empty())) ++start;
  if (start == seq.size()) {
    spdlog::warn("sequence {}: no visible initial box; emitting empty predictions", seq.id);
    return out;
  }
  Tracker tracker(model, config);
  out[start] = tracker.initialize(seq.load_frame(start), seq.boxes[start], seq.description);
  for (std::size_t t = start + 1; t < seq.size(); ++t) out[t] = tracker.track(seq.load_frame(t));
  return out;
}

}  // namespace cost
