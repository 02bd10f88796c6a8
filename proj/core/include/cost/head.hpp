#pragma once

#include <vector>

#include "cost/box.hpp"
#include "cost/cvlf.hpp"

namespace cost {

struct LossWeights {
  double l1 = 5.0;    ///< lambda_1
  double giou = 2.0;  ///< lambda_G
  double ce = 1.0;    ///< alpha
};

/// Per-candidate outputs. Boxes are (cx, cy, w, h) normalized to the search region.
struct HeadOutput {
  Tensor confidence;  ///< [T], foreground probability
  Tensor boxes;       ///< [T x 4]

  std::size_t candidates() const { return confidence.numel(); }
  BoundingBox box(std::size_t i) const;  ///< candidate i as a normalized top-left box
};

/// Classification MLP (two layers, sigmoid) and regression MLP (one layer, sigmoid).
class TrackingHead {
 public:
  TrackingHead() = default;
  TrackingHead(std::size_t width, Rng& rng);

  HeadOutput forward(const FusedTokens& fused) const;
  HeadOutput forward(const Tensor& tokens) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear cls_hidden, cls_out, reg;
};

/// 1 for visual tokens whose cell centre lies inside `gt` (normalized search
/// coordinates, half-open on the right/bottom edge); 0 for everything else.
std::vector<int> assign_labels(const IndexMap& index, const BoundingBox& gt);

enum class Reduction { Sum, Mean };

/// Negated binary cross-entropy with confidences clamped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& confidence, const std::vector<int>& labels, Reduction reduction = Reduction::Sum);

/// GIoU per row of pred [P x 4] against gt [4], both (cx, cy, w, h).
Tensor giou_rows(const Tensor& pred, const Tensor& gt);

/// sum over positives of l1 * |B - B^|_1 + giou * (1 - GIoU), divided by the
/// number of positives. The L1 term sums the four (cx, cy, w, h) differences.
/// Zero (with a warning) when there are no positives.
Tensor regression_loss(const Tensor& pred_boxes, const BoundingBox& gt, const std::vector<int>& labels,
                       const LossWeights& weights);

/// coa + reg + alpha * ce. Throws NumericError on a non-finite component.
Tensor total_loss(const Tensor& coa, const Tensor& reg, const Tensor& ce, const LossWeights& weights);

}  // namespace cost
