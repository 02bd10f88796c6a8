#include "cost/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace cost {

GradTape GradTape::record(const Tensor& root) {
  GradTape tape;
  if (!root.defined()) return tape;
  std::unordered_set<detail::Node*> visited;
  // Iterative post-order DFS; (node, next-parent-index) frames.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

bool GradTape::is_topological() const {
  std::unordered_map<const detail::Node*, std::size_t> position;
  for (std::size_t i = 0; i < nodes_.size(); ++i) position[nodes_[i]] = i;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (const auto& p : nodes_[i]->parents) {
      auto it = position.find(p.get());
      if (it != position.end() && it->second >= i) return false;
    }
  return true;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::logic_error("backward: undefined loss");
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw std::logic_error("backward: loss is detached from the tape");

  const GradTape tape = GradTape::record(loss);
  const auto& nodes = tape.nodes();
  for (detail::Node* n : nodes)
    if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;

  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }

  for (detail::Node* n : nodes) {
    if (!n->parents.empty()) continue;
    for (double g : n->grad)
      if (!std::isfinite(g)) throw NumericError("backward: non-finite gradient on a leaf of shape " + shape_str(n->shape));
  }
}

}  // namespace cost
