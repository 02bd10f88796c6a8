#include "cost/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cost {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

// Builds the output node; the backward closure is attached only when recording.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents, const char* op,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool record = grad_enabled();
  if (record) {
    record = false;
    for (const auto& p : parents)
      if (p->requires_grad) record = true;
  }
  if (record) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(node));
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Flat source offsets for every output element under broadcasting.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t lead = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > lead;) {
    const std::size_t extent = in[i - lead];
    stride[i] = extent == 1 ? 0 : s;
    s *= extent;
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < n; ++k) {
    index[k] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += stride[d];
      if (counter[d] < out[d]) break;
      offset -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

template <class Fwd, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* op, Fwd f, DA da, DB db) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const auto& xa = a.node()->data;
  const auto& xb = b.node()->data;
  if (sa == sb) {
    const std::size_t n = xa.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[i], xb[i]);
    Node* pa = a.node();
    Node* pb = b.node();
    return make_result(sa, std::move(out), {a.node_ptr(), b.node_ptr()}, op, [pa, pb, da, db](Node& self) {
      const std::size_t n = self.data.size();
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          pa->grad[i] += self.grad[i] * da(pa->data[i], pb->data[i], self.data[i]);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          pb->grad[i] += self.grad[i] * db(pa->data[i], pb->data[i], self.data[i]);
      }
    });
  }
  Shape so = broadcast_shape(sa, sb, op);
  // Fast path: one operand is the full output and the other tiles it (trailing-suffix shape).
  const auto tiles = [&](const Shape& small) {
    std::size_t lead = so.size() - small.size();
    while (lead < so.size() && small[lead - (so.size() - small.size())] == 1) ++lead;
    for (std::size_t i = lead; i < so.size(); ++i)
      if (small[i - (so.size() - small.size())] != so[i]) return false;
    return true;
  };
  if ((sa == so && tiles(sb)) || (sb == so && tiles(sa))) {
    const bool a_full = sa == so;
    const std::size_t n = shape_numel(so);
    const std::size_t period = a_full ? xb.size() : xa.size();
    std::vector<double> out(n);
    if (a_full)
      for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[i], xb[i % period]);
    else
      for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[i % period], xb[i]);
    Node* pa = a.node();
    Node* pb = b.node();
    return make_result(std::move(so), std::move(out), {a.node_ptr(), b.node_ptr()}, op,
                       [pa, pb, da, db, a_full, period](Node& self) {
                         const std::size_t n = self.data.size();
                         const auto ja = [&](std::size_t i) { return a_full ? i : i % period; };
                         const auto jb = [&](std::size_t i) { return a_full ? i % period : i; };
                         if (pa->requires_grad) {
                           pa->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i)
                             pa->grad[ja(i)] += self.grad[i] * da(pa->data[ja(i)], pb->data[jb(i)], self.data[i]);
                         }
                         if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i)
                             pb->grad[jb(i)] += self.grad[i] * db(pa->data[ja(i)], pb->data[jb(i)], self.data[i]);
                         }
                       });
  }
  auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(sa, so));
  auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(sb, so));
  const std::size_t n = ia->size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[(*ia)[i]], xb[(*ib)[i]]);
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(std::move(so), std::move(out), {a.node_ptr(), b.node_ptr()}, op,
                     [pa, pb, ia, ib, da, db](Node& self) {
                       const std::size_t n = self.data.size();
                       if (pa->requires_grad) {
                         pa->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           const std::size_t j = (*ia)[i], k = (*ib)[i];
                           pa->grad[j] += self.grad[i] * da(pa->data[j], pb->data[k], self.data[i]);
                         }
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           const std::size_t j = (*ia)[i], k = (*ib)[i];
                           pb->grad[k] += self.grad[i] * db(pa->data[j], pb->data[k], self.data[i]);
                         }
                       }
                     });
}

template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& x, const char* op, Fwd f, Deriv d) {
  const auto& xs = x.node()->data;
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  Node* px = x.node();
  return make_result(x.shape(), std::move(out), {x.node_ptr()}, op, [px, d](Node& self) {
    px->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) px->grad[i] += self.grad[i] * d(px->data[i], self.data[i]);
  });
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

// Ties send the gradient to the first operand.
Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "maximum", [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      a, "mul_scalar", [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) {
  return unary_op(
      x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      x, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary_op(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int m = static_cast<int>(a.dim(0));
  const int k = static_cast<int>(a.dim(1));
  const int n = static_cast<int>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a.data().data(), k, b.data().data(), n,
              0.0, out.data(), n);
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result({a.dim(0), b.dim(1)}, std::move(out), {a.node_ptr(), b.node_ptr()}, "matmul",
                     [pa, pb, m, k, n](Node& self) {
                       if (pa->requires_grad) {
                         pa->ensure_grad();
                         // dA += dC * B^T
                         cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0, self.grad.data(), n,
                                     pb->data.data(), n, 1.0, pa->grad.data(), k);
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         // dB += A^T * dC
                         cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0, pa->data.data(), k,
                                     self.grad.data(), n, 1.0, pb->grad.data(), n);
                       }
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected a matrix, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xs = x.node()->data;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xs[i * n + j];
  Node* px = x.node();
  return make_result({n, m}, std::move(out), {x.node_ptr()}, "transpose", [px, m, n](Node& self) {
    px->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) px->grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  Node* px = x.node();
  return make_result(std::move(shape), x.node()->data, {x.node_ptr()}, "reshape", [px](Node& self) {
    px->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Node* px = x.node();
  return make_result({1}, {s}, {x.node_ptr()}, "sum", [px](Node& self) {
    px->ensure_grad();
    const double g = self.grad[0];
    for (double& v : px->grad) v += g;
  });
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "sum");
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto& xs = x.node()->data;
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xs[(o * s.extent + e) * s.inner + i];
  Shape shape = x.shape();
  if (keepdim) {
    shape[axis] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (shape.empty()) shape = {1};
  }
  Node* px = x.node();
  return make_result(std::move(shape), std::move(out), {x.node_ptr()}, "sum_axis", [px, s](Node& self) {
    px->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          px->grad[(o * s.extent + e) * s.inner + i] += self.grad[o * s.inner + i];
  });
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "mean");
  return mul_scalar(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto& xs = x.node()->data;
  std::vector<double> out(xs.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, xs[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(xs[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= z;
    }
  Node* px = x.node();
  return make_result(x.shape(), std::move(out), {x.node_ptr()}, "softmax", [px, s](Node& self) {
    px->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t k = base + e * s.inner;
          dot += self.grad[k] * self.data[k];
        }
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t k = base + e * s.inner;
          px->grad[k] += self.data[k] * (self.grad[k] - dot);
        }
      }
  });
}

Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "logsumexp");
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto& xs = x.node()->data;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = kNegInf;
      for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, xs[base + e * s.inner]);
      if (mx == kNegInf) {
        out[o * s.inner + i] = kNegInf;
        continue;
      }
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) z += std::exp(xs[base + e * s.inner] - mx);
      out[o * s.inner + i] = mx + std::log(z);
    }
  Shape shape = x.shape();
  if (keepdim) {
    shape[axis] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (shape.empty()) shape = {1};
  }
  Node* px = x.node();
  return make_result(std::move(shape), std::move(out), {x.node_ptr()}, "logsumexp", [px, s](Node& self) {
    px->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double lse = self.data[o * s.inner + i];
        const double g = self.grad[o * s.inner + i];
        if (!std::isfinite(lse)) continue;
        const std::size_t base = o * s.extent * s.inner + i;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t k = base + e * s.inner;
          px->grad[k] += g * std::exp(px->data[k] - lse);
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n)
    throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                     " do not match last axis of " + shape_str(x.shape()));
  const std::size_t rows = x.numel() / n;
  const auto& xs = x.node()->data;
  const auto& gs = gamma.node()->data;
  const auto& bs = beta.node()->data;
  std::vector<double> out(xs.size());
  auto xhat = std::make_shared<std::vector<double>>(xs.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * rs;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = gs[j] * h + bs[j];
    }
  }
  Node* px = x.node();
  Node* pg = gamma.node();
  Node* pb = beta.node();
  return make_result(x.shape(), std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()}, "layer_norm",
                     [px, pg, pb, xhat, rstd, rows, n](Node& self) {
                       const auto& g = self.grad;
                       if (pg->requires_grad) {
                         pg->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < n; ++j) pg->grad[j] += g[r * n + j] * (*xhat)[r * n + j];
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < n; ++j) pb->grad[j] += g[r * n + j];
                       }
                       if (px->requires_grad) {
                         px->ensure_grad();
                         const double inv_n = 1.0 / static_cast<double>(n);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double m1 = 0.0, m2 = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dh = g[r * n + j] * pg->data[j];
                             m1 += dh;
                             m2 += dh * (*xhat)[r * n + j];
                           }
                           m1 *= inv_n;
                           m2 *= inv_n;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dh = g[r * n + j] * pg->data[j];
                             px->grad[r * n + j] += (*rstd)[r] * (dh - m1 - (*xhat)[r * n + j] * m2);
                           }
                         }
                       }
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  check_axis(parts[0], axis, "concat");
  Shape shape = ref;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != ref[d]) ok = false;
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(ref));
    shape[axis] += s[axis];
  }
  const AxisSplit out_split = split_axis(shape, axis);
  std::vector<double> out(shape_numel(shape));
  std::vector<NodePtr> parents;
  std::vector<Node*> raw;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t ext = p.shape()[axis];
    const std::size_t chunk = ext * out_split.inner;
    const auto& ps = p.node()->data;
    for (std::size_t o = 0; o < out_split.outer; ++o)
      std::copy_n(ps.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>((o * out_split.extent + offset) * out_split.inner));
    parents.push_back(p.node_ptr());
    raw.push_back(p.node());
    offsets.push_back(offset);
    offset += ext;
  }
  return make_result(std::move(shape), std::move(out), std::move(parents), "concat",
                     [raw, offsets, out_split, axis](Node& self) {
                       for (std::size_t k = 0; k < raw.size(); ++k) {
                         Node* p = raw[k];
                         if (!p->requires_grad) continue;
                         p->ensure_grad();
                         const std::size_t chunk = p->shape[axis] * out_split.inner;
                         for (std::size_t o = 0; o < out_split.outer; ++o) {
                           const double* src =
                               self.grad.data() + (o * out_split.extent + offsets[k]) * out_split.inner;
                           double* dst = p->grad.data() + o * chunk;
                           for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(x, axis, "slice");
  if (length == 0 || start + length > x.dim(axis))
    throw ShapeError("slice: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  const std::size_t chunk = length * s.inner;
  const auto& xs = x.node()->data;
  std::vector<double> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>((o * s.extent + start) * s.inner), chunk,
                out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  Node* px = x.node();
  return make_result(std::move(shape), std::move(out), {x.node_ptr()}, "slice", [px, s, start, chunk](Node& self) {
    px->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = px->grad.data() + (o * s.extent + start) * s.inner;
      const double* src = self.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ShapeError("index_rows: empty index list");
  const std::size_t n_rows = x.dim(0);
  const std::size_t width = x.numel() / n_rows;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (auto r : idx)
    if (r >= n_rows)
      throw ShapeError("index_rows: row " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
  Shape shape = x.shape();
  shape[0] = idx.size();
  const auto& xs = x.node()->data;
  std::vector<double> out(idx.size() * width);
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(idx[k] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(k * width));
  Node* px = x.node();
  return make_result(std::move(shape), std::move(out), {x.node_ptr()}, "index_rows",
                     [px, idx = std::move(idx), width](Node& self) {
                       px->ensure_grad();
                       for (std::size_t k = 0; k < idx.size(); ++k)
                         for (std::size_t j = 0; j < width; ++j)
                           px->grad[idx[k] * width + j] += self.grad[k * width + j];
                     });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (input.rank() != 3 || weight.rank() != 4 || weight.dim(1) != input.dim(0) || weight.dim(2) != weight.dim(3))
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  if (bias.numel() != weight.dim(0))
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + shape_str(weight.shape()));
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (h + 2 * padding < k || w + 2 * padding < k)
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                     shape_str(input.shape()));
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const std::size_t patch = cin * k * k;
  const std::size_t positions = ho * wo;

  // im2col: [patch x positions]
  auto cols = std::make_shared<std::vector<double>>(patch * positions, 0.0);
  const auto& xs = input.node()->data;
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::size_t row = (c * k + ky) * k + kx;
        double* dst = cols->data() + row * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[oy * wo + ox] = xs[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
          }
        }
      }

  std::vector<double> out(cout * positions);
  const auto& bs = bias.node()->data;
  for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o * positions), positions, bs[o]);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cout), static_cast<int>(positions),
              static_cast<int>(patch), 1.0, weight.data().data(), static_cast<int>(patch), cols->data(),
              static_cast<int>(positions), 1.0, out.data(), static_cast<int>(positions));

  Node* px = input.node();
  Node* pw = weight.node();
  Node* pb = bias.node();
  return make_result(
      {cout, ho, wo}, std::move(out), {input.node_ptr(), weight.node_ptr(), bias.node_ptr()}, "conv2d",
      [=](Node& self) {
        const int icout = static_cast<int>(cout), ipos = static_cast<int>(positions), ipatch = static_cast<int>(patch);
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t o = 0; o < cout; ++o) {
            double s = 0.0;
            for (std::size_t p = 0; p < positions; ++p) s += self.grad[o * positions + p];
            pb->grad[o] += s;
          }
        }
        if (pw->requires_grad) {
          pw->ensure_grad();
          cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, icout, ipatch, ipos, 1.0, self.grad.data(), ipos,
                      cols->data(), ipos, 1.0, pw->grad.data(), ipatch);
        }
        if (px->requires_grad) {
          px->ensure_grad();
          std::vector<double> dcols(patch * positions, 0.0);
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, ipatch, ipos, icout, 1.0, pw->data.data(), ipatch,
                      self.grad.data(), ipos, 0.0, dcols.data(), ipos);
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::size_t row = (c * k + ky) * k + kx;
                const double* src = dcols.data() + row * positions;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const std::ptrdiff_t iy =
                      static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    px->grad[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                        src[oy * wo + ox];
                  }
                }
              }
        }
      });
}

Tensor center_crop(const Tensor& input, std::size_t side) {
  if (input.rank() != 3) throw ShapeError("center_crop: expected [C x H x W], got " + shape_str(input.shape()));
  const std::size_t h = input.dim(1), w = input.dim(2);
  if (side == 0 || side > h || side > w)
    throw ShapeError("center_crop: side " + std::to_string(side) + " invalid for " + shape_str(input.shape()));
  return slice(slice(input, 1, (h - side) / 2, side), 2, (w - side) / 2, side);
}

}  // namespace cost
