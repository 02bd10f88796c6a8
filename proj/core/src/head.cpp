#include "cost/head.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <stdexcept>

namespace cost {

namespace {
constexpr double kProbEps = 1e-7;

Tensor box_tensor(const BoundingBox& b) { return Tensor::from({4}, {b.cx(), b.cy(), b.w, b.h}); }
}  // namespace

BoundingBox HeadOutput::box(std::size_t i) const {
  return BoundingBox::from_center(boxes.at(i, 0), boxes.at(i, 1), boxes.at(i, 2), boxes.at(i, 3));
}

TrackingHead::TrackingHead(std::size_t width, Rng& rng)
    : cls_hidden(width, width, rng), cls_out(width, 1, rng), reg(width, 4, rng) {}

HeadOutput TrackingHead::forward(const Tensor& tokens) const {
  const Tensor logits = cls_out.forward(relu(cls_hidden.forward(tokens)));
  return {sigmoid(reshape(logits, {tokens.dim(0)})), sigmoid(reg.forward(tokens))};
}

HeadOutput TrackingHead::forward(const FusedTokens& fused) const { return forward(fused.tokens); }

void TrackingHead::collect(const std::string& prefix, ParameterList& out) const {
  cls_hidden.collect(prefix + ".cls_hidden", out);
  cls_out.collect(prefix + ".cls_out", out);
  reg.collect(prefix + ".reg", out);
}

std::vector<int> assign_labels(const IndexMap& index, const BoundingBox& gt) {
  std::vector<int> labels(index.total(), 0);
  if (!gt.valid()) throw std::invalid_argument("assign_labels: invalid ground-truth box");
  if (gt.right() <= 0.0 || gt.bottom() <= 0.0 || gt.x >= 1.0 || gt.y >= 1.0) {
    spdlog::warn("assign_labels: ground-truth box lies outside the search region; all labels negative");
    return labels;
  }
  for (std::size_t i = 0; i < index.visual_count; ++i) {
    const auto [cx, cy] = index.visual_centers[i];
    if (cx >= gt.x && cx < gt.right() && cy >= gt.y && cy < gt.bottom()) labels[i] = 1;
  }
  return labels;
}

Tensor bce_loss(const Tensor& confidence, const std::vector<int>& labels, Reduction reduction) {
  if (confidence.numel() != labels.size())
    throw ShapeError("bce_loss: " + std::to_string(confidence.numel()) + " confidences vs " +
                     std::to_string(labels.size()) + " labels");
  std::vector<double> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? 1.0 : 0.0;
  const Tensor target = Tensor::from({labels.size()}, std::move(y));
  const Tensor p = clamp(reshape(confidence, {labels.size()}), kProbEps, 1.0 - kProbEps);
  const Tensor ll = add(mul(target, log(p)), mul(1.0 - target, log(1.0 - p)));
  const Tensor total = neg(sum(ll));
  return reduction == Reduction::Mean ? mul_scalar(total, 1.0 / static_cast<double>(labels.size())) : total;
}

Tensor giou_rows(const Tensor& pred, const Tensor& gt) {
  if (pred.rank() != 2 || pred.dim(1) != 4 || gt.numel() != 4)
    throw ShapeError("giou_rows: expected [P x 4] and [4], got " + shape_str(pred.shape()) + " and " +
                     shape_str(gt.shape()));
  const Tensor g = reshape(gt, {1, 4});
  auto corners = [](const Tensor& b) {
    const Tensor cx = slice(b, 1, 0, 1), cy = slice(b, 1, 1, 1);
    const Tensor hw = mul_scalar(slice(b, 1, 2, 1), 0.5), hh = mul_scalar(slice(b, 1, 3, 1), 0.5);
    return std::array<Tensor, 4>{sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)};
  };
  const auto [px0, py0, px1, py1] = corners(pred);
  const auto [gx0, gy0, gx1, gy1] = corners(g);
  const Tensor zero = Tensor::scalar(0.0);
  const Tensor iw = maximum(sub(minimum(px1, gx1), maximum(px0, gx0)), zero);
  const Tensor ih = maximum(sub(minimum(py1, gy1), maximum(py0, gy0)), zero);
  const Tensor inter = mul(iw, ih);
  const Tensor area_p = mul(sub(px1, px0), sub(py1, py0));
  const Tensor area_g = mul(sub(gx1, gx0), sub(gy1, gy0));
  const Tensor uni = sub(add(area_p, area_g), inter);
  const Tensor cw = sub(maximum(px1, gx1), minimum(px0, gx0));
  const Tensor ch = sub(maximum(py1, gy1), minimum(py0, gy0));
  const Tensor enclosing = mul(cw, ch);
  const Tensor tiny = Tensor::scalar(1e-12);
  const Tensor iou_t = div(inter, maximum(uni, tiny));
  const Tensor penalty = div(sub(enclosing, uni), maximum(enclosing, tiny));
  return reshape(sub(iou_t, penalty), {pred.dim(0)});
}

Tensor regression_loss(const Tensor& pred_boxes, const BoundingBox& gt, const std::vector<int>& labels,
                       const LossWeights& weights) {
  if (pred_boxes.rank() != 2 || pred_boxes.dim(1) != 4 || pred_boxes.dim(0) != labels.size())
    throw ShapeError("regression_loss: boxes " + shape_str(pred_boxes.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) positives.push_back(i);
  if (positives.empty()) {
    spdlog::warn("regression_loss: no positive candidates; loss is zero");
    // Keep the result attached to the graph so callers can still sum it.
    return mul_scalar(sum(pred_boxes), 0.0);
  }
  const Tensor pred = index_rows(pred_boxes, positives);
  const Tensor target = box_tensor(gt);
  const Tensor l1 = sum(abs(sub(pred, reshape(target, {1, 4}))));
  const Tensor giou_term = sum(1.0 - giou_rows(pred, target));
  const Tensor total = add(mul_scalar(l1, weights.l1), mul_scalar(giou_term, weights.giou));
  return mul_scalar(total, 1.0 / static_cast<double>(positives.size()));
}

Tensor total_loss(const Tensor& coa, const Tensor& reg, const Tensor& ce, const LossWeights& weights) {
  for (const auto* t : {&coa, &reg, &ce})
    if (!std::isfinite(t->item())) throw NumericError("total_loss: non-finite loss component");
  return add(add(coa, reg), mul_scalar(ce, weights.ce));
}

}  // namespace cost
