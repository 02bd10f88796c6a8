#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cost/crop.hpp"
#include "cost/dataset.hpp"
#include "cost/model.hpp"
#include "cost/optim.hpp"

namespace cost {

struct TrainConfig {
  std::size_t pairs_per_epoch = 200;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double grad_clip = 5.0;   ///< max global gradient norm; 0 disables
  double translate = -1.0;  ///< search-crop jitter T in output pixels; negative means 8 * search_size / 256
  double brightness = 0.2;  ///< b
  double scale_jitter = 0.0;  ///< s; search-crop side scaled by a factor in [1 - s, 1 + s]
  std::size_t max_frame_gap = 100;
  double search_scale = 4.0;
  double template_scale = 2.0;
  LossWeights weights;
  CoAConfig coa;
  bool use_coa = true;
  bool use_language = true;
  bool coa_only = false;  ///< optimize the alignment loss alone
  std::uint64_t seed = 1;

  /// 4200 pairs per epoch, 1000 epochs, batch 14.
  static TrainConfig paper();
  double translation(std::size_t search_size) const {
    return translate >= 0.0 ? translate : 8.0 * static_cast<double>(search_size) / 256.0;
  }
  void validate() const;
};

struct AugmentParams {
  double dx = 0.0;  ///< crop shift in output pixels
  double dy = 0.0;
  double brightness = 1.0;
  double scale = 1.0;  ///< crop side multiplier
};

/// dx, dy uniform in [-T, T]; brightness uniform in [1 - b, 1 + b]; scale
/// uniform in [1 - s, 1 + s], drawn only when s > 0.
AugmentParams sample_augment(double translate, double brightness, Rng& rng, double scale_jitter = 0.0);

struct AugmentedCrop {
  ImageTensor image;
  BoundingBox target;  ///< ground truth in crop pixels
  CropTransform transform;
};

/// Crop around `box`, shifted by (dx, dy) output pixels, widened by `scale`
/// and brightness-scaled before normalization. The target moves by
/// (-dx, -dy) in crop pixels.
AugmentedCrop augment_crop(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size,
                           const AugmentParams& params);

struct EpochStats {
  double total = 0.0;
  double coa = 0.0;
  double reg = 0.0;
  double ce = 0.0;
  std::size_t samples = 0;
  std::size_t steps = 0;
};

/// One (template, search, description) draw.
struct SampleDraw {
  std::size_t sequence = 0;
  std::size_t template_frame = 0;
  std::size_t search_frame = 0;
  AugmentParams augment;
};

class Trainer {
 public:
  /// Throws std::invalid_argument for an empty training set or a sequence
  /// with fewer than one visible, non-empty frame.
  Trainer(CostModel& model, std::vector<SequenceAnnotation> sequences, TrainConfig config);

  /// pairs_per_epoch samples in batches; one AdamW step per batch.
  /// Throws NumericError naming the sample on a non-finite loss.
  EpochStats train_epoch();
  /// Runs up to `steps` further optimizer steps (across epoch boundaries) and
  /// returns the stats of those steps.
  EpochStats train_steps(std::size_t steps);

  const AdamW& optimizer() const { return optimizer_; }
  std::size_t epoch() const { return epoch_; }
  const TrainConfig& config() const { return config_; }

  /// Pooled, projected CoA embeddings of one sequence (eval mode, first
  /// visible frame as both template and search source).
  EmbeddingPair embed(std::size_t sequence);

 private:
  std::vector<SampleDraw> draw_batch(std::size_t size);
  EpochStats step(const std::vector<SampleDraw>& batch);
  const RgbImage& frame(std::size_t sequence, std::size_t t);

  CostModel& model_;
  std::vector<SequenceAnnotation> sequences_;
  std::vector<std::vector<std::size_t>> usable_;  // visible frames per sequence
  TrainConfig config_;
  AdamW optimizer_;
  Rng sample_rng_;
  Rng dropout_rng_;
  std::map<std::pair<std::size_t, std::size_t>, RgbImage> frames_;
  std::size_t epoch_ = 0;
  std::size_t sample_counter_ = 0;
};

}  // namespace cost
