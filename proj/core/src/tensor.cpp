#include "cost/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cost {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) { return Tensor(std::move(node)); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != values.size())
    throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                     " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({m, n}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return from({values.size()}, std::vector<double>(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  shape();
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  shape();
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw ShapeError("at(i, j) needs a matrix, got " + shape_str(shape()));
  return node_->data[i * node_->shape[1] + j];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  shape();
  node_->requires_grad = flag;
  if (flag) node_->ensure_grad();
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

Tensor Tensor::clone() const { return from(shape(), node_->data, requires_grad()); }

bool Tensor::is_leaf() const { return node_ && node_->parents.empty(); }

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace cost
