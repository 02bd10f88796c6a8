#pragma once

#include <vector>

#include "cost/tensor.hpp"

namespace cost {

/// Operations reachable from a root, ordered so every parent precedes its children.
class GradTape {
 public:
  static GradTape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<detail::Node*>& nodes() const { return nodes_; }
  /// Checks the topological-order invariant.
  bool is_topological() const;

 private:
  std::vector<detail::Node*> nodes_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls until zeroed; interior gradients are recomputed each call.
/// Throws ShapeError for non-scalar loss, std::logic_error for a detached loss,
/// NumericError if any leaf gradient ends non-finite.
void backward(const Tensor& loss);

}  // namespace cost
