#include "divsample/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace divsample::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (!t.defined()) shape_fail(op, "undefined input");
  if (t.rank() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Gradient buffer of parent `i`, or nullptr when it does not take part.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0);
  return p.grad.data();
}

const double* value_of(Node& self, std::size_t i) { return self.parents[i]->value.data(); }

Tensor record(const char* op, Shape shape, std::vector<double> value,
              std::initializer_list<Tensor> inputs, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (any && grad_enabled()) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(bw);
  }
  return Tensor::from_node(std::move(node));
}

Tensor record_many(const char* op, Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& inputs, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (any && grad_enabled()) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(bw);
  }
  return Tensor::from_node(std::move(node));
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  if (!a.defined()) shape_fail(op, "undefined input");
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return record(op, a.shape(), std::move(out), {a}, [deriv](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    const double* x = value_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i] * deriv(x[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    shape_fail("matmul", "inner dimensions differ " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return record("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMap g(self.grad.data(), m, n);
    if (double* ga = grad_of(self, 0)) {
      MutMap(ga, m, k).noalias() += g * ConstMap(value_of(self, 1), k, n).transpose();
    }
    if (double* gb = grad_of(self, 1)) {
      MutMap(gb, k, n).noalias() += ConstMap(value_of(self, 0), m, k).transpose() * g;
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != batch || b.dim(1) != k) {
    shape_fail("bmm", "incompatible " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  }
  std::vector<double> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    MutMap(out.data() + i * m * n, m, n).noalias() =
        ConstMap(a.data().data() + i * m * k, m, k) * ConstMap(b.data().data() + i * k * n, k, n);
  }
  return record("bmm", {batch, m, n}, std::move(out), {a, b}, [batch, m, k, n](Node& self) {
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    const double* av = value_of(self, 0);
    const double* bv = value_of(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMap g(self.grad.data() + i * m * n, m, n);
      if (ga) MutMap(ga + i * m * k, m, k).noalias() += g * ConstMap(bv + i * k * n, k, n).transpose();
      if (gb) MutMap(gb + i * k * n, k, n).noalias() += ConstMap(av + i * m * k, m, k).transpose() * g;
    }
  });
}

Tensor left_matmul(const Tensor& left, const Tensor& x) {
  require_rank("left_matmul", left, 2);
  require_rank("left_matmul", x, 3);
  const auto j = left.dim(0), batch = x.dim(0), f = x.dim(2);
  if (left.dim(1) != j || x.dim(1) != j) {
    shape_fail("left_matmul", "adjacency " + shape_str(left.shape()) + " vs features " + shape_str(x.shape()));
  }
  std::vector<double> out(batch * j * f);
  ConstMap l(left.data().data(), j, j);
  for (std::size_t b = 0; b < batch; ++b) {
    MutMap(out.data() + b * j * f, j, f).noalias() = l * ConstMap(x.data().data() + b * j * f, j, f);
  }
  return record("left_matmul", {batch, j, f}, std::move(out), {left, x}, [batch, j, f](Node& self) {
    double* gl = grad_of(self, 0);
    double* gx = grad_of(self, 1);
    ConstMap l(value_of(self, 0), j, j);
    const double* xv = value_of(self, 1);
    RowMat acc = RowMat::Zero(j, j);
    for (std::size_t b = 0; b < batch; ++b) {
      ConstMap g(self.grad.data() + b * j * f, j, f);
      if (gl) acc.noalias() += g * ConstMap(xv + b * j * f, j, f).transpose();
      if (gx) MutMap(gx + b * j * f, j, f).noalias() += l.transpose() * g;
    }
    if (gl) MutMap(gl, j, j) += acc;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return record("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return record("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return record("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double* av = value_of(self, 0);
    const double* bv = value_of(self, 1);
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", bias, 1);
  if (!x.defined() || x.shape().back() != bias.dim(0)) {
    shape_fail("add_bias", "bias " + shape_str(bias.shape()) + " does not match last axis of " +
                               (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
  }
  const auto d = bias.dim(0);
  const auto rows = x.numel() / d;
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] += bias.data()[c];
  }
  return record("add_bias", x.shape(), std::move(out), {x, bias}, [rows, d](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
      }
    }
  });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor softmax(const Tensor& a) {
  if (!a.defined() || a.rank() == 0) shape_fail("softmax", "undefined input");
  const auto d = a.shape().back();
  const auto rows = a.numel() / d;
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * d;
    double* y = out.data() + r * d;
    const double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (std::size_t c = 0; c < d; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < d; ++c) y[c] /= z;
  }
  return record("softmax", a.shape(), std::move(out), {a}, [rows, d](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < d; ++c) ga[r * d + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor sum(const Tensor& a) {
  if (!a.defined()) shape_fail("sum", "undefined input");
  double s = 0.0;
  for (double v : a.data()) s += v;
  return record("sum", {1}, {s}, {a}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      const auto n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor min_last(const Tensor& a) {
  if (!a.defined() || a.rank() == 0) shape_fail("min_last", "undefined input");
  const auto d = a.shape().back();
  const auto rows = a.numel() / d;
  std::vector<double> out(rows);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * d;
    const auto it = std::min_element(x, x + d);
    arg[r] = static_cast<std::size_t>(it - x);
    out[r] = *it;
  }
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  if (shape.empty()) shape = {1};
  return record("min_last", shape, std::move(out), {a}, [arg = std::move(arg), d](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < arg.size(); ++r) g[r * d + arg[r]] += self.grad[r];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (!a.defined() || shape_numel(shape) != a.numel()) {
    shape_fail("reshape", "cannot view " + (a.defined() ? shape_str(a.shape()) : std::string("undefined")) +
                              " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return record("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_fail("concat", "axis out of range for " + shape_str(first));
  std::size_t outer = 1, inner = 1, total = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) shape_fail("concat", "part " + shape_str(s) + " incompatible with " + shape_str(first));
    widths.push_back(s[axis] * inner);
    total += s[axis];
  }
  const std::size_t row = total * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  Shape shape = first;
  shape[axis] = total;
  return record_many("concat", shape, std::move(out), parts, [widths, outer, row](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (double* g = grad_of(self, p)) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < widths[p]; ++i) g[o * widths[p] + i] += self.grad[o * row + offset + i];
        }
      }
      offset += widths[p];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (!a.defined() || axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    shape_fail("slice", "invalid range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                            std::to_string(axis) + " of " +
                            (a.defined() ? shape_str(a.shape()) : std::string("undefined")));
  }
  const Shape& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t src_row = s[axis] * inner;
  const std::size_t dst_row = (end - begin) * inner;
  std::vector<double> out(outer * dst_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().data() + o * src_row + begin * inner, dst_row, out.data() + o * dst_row);
  }
  Shape shape = s;
  shape[axis] = end - begin;
  return record("slice", shape, std::move(out), {a},
                [outer, src_row, dst_row, off = begin * inner](Node& self) {
                  if (double* g = grad_of(self, 0)) {
                    for (std::size_t o = 0; o < outer; ++o) {
                      for (std::size_t i = 0; i < dst_row; ++i) g[o * src_row + off + i] += self.grad[o * dst_row + i];
                    }
                  }
                });
}

Tensor repeat(const Tensor& a, std::size_t axis, std::size_t count) {
  if (!a.defined() || axis > a.rank() || count == 0) {
    shape_fail("repeat", "invalid axis/count for " + (a.defined() ? shape_str(a.shape()) : std::string("undefined")));
  }
  const Shape& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis; i < s.size(); ++i) inner *= s[i];
  std::vector<double> out(outer * count * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < count; ++c) {
      std::copy_n(a.data().data() + o * inner, inner, out.data() + (o * count + c) * inner);
    }
  }
  Shape shape = s;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  return record("repeat", shape, std::move(out), {a}, [outer, count, inner](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t c = 0; c < count; ++c) {
          const double* src = self.grad.data() + (o * count + c) * inner;
          for (std::size_t i = 0; i < inner; ++i) g[o * inner + i] += src[i];
        }
      }
    }
  });
}

Tensor pairwise_distances(const Tensor& x) {
  require_rank("pairwise_distances", x, 3);
  const auto batch = x.dim(0), k = x.dim(1), d = x.dim(2);
  std::vector<double> out(batch * k * k, 0.0);
  const double* xv = x.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double* xi = xv + (b * k + i) * d;
        const double* xj = xv + (b * k + j) * d;
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = xi[c] - xj[c];
          s += diff * diff;
        }
        out[(b * k + i) * k + j] = out[(b * k + j) * k + i] = std::sqrt(s);
      }
    }
  }
  return record("pairwise_distances", {batch, k, k}, std::move(out), {x}, [batch, k, d](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double* xv = value_of(self, 0);
    // grad_i = sum_j w_ij (x_i - x_j) = rowsum(W)_i x_i - (W x)_i
    RowMat w = RowMat::Zero(k, k);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          const double dist = self.value[(b * k + i) * k + j];
          const double v =
              dist == 0.0 ? 0.0 : (self.grad[(b * k + i) * k + j] + self.grad[(b * k + j) * k + i]) / dist;
          w(i, j) = w(j, i) = v;
        }
      }
      ConstMap x(xv + b * k * d, k, d);
      MutMap g(gx + b * k * d, k, d);
      g.noalias() -= w * x;
      g += w.rowwise().sum().asDiagonal() * x;
    }
  });
}

Tensor distances_to(const Tensor& x, const Tensor& y) {
  require_rank("distances_to", x, 3);
  require_rank("distances_to", y, 2);
  const auto batch = x.dim(0), k = x.dim(1), d = x.dim(2);
  if (y.dim(0) != batch || y.dim(1) != d) {
    shape_fail("distances_to", "predictions " + shape_str(x.shape()) + " vs target " + shape_str(y.shape()));
  }
  std::vector<double> out(batch * k);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* yb = y.data().data() + b * d;
    for (std::size_t i = 0; i < k; ++i) {
      const double* xi = x.data().data() + (b * k + i) * d;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = xi[c] - yb[c];
        s += diff * diff;
      }
      out[b * k + i] = std::sqrt(s);
    }
  }
  return record("distances_to", {batch, k}, std::move(out), {x, y}, [batch, k, d](Node& self) {
    double* gx = grad_of(self, 0);
    double* gy = grad_of(self, 1);
    const double* xv = value_of(self, 0);
    const double* yv = value_of(self, 1);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < k; ++i) {
        const double dist = self.value[b * k + i];
        if (dist == 0.0) continue;
        const double w = self.grad[b * k + i] / dist;
        for (std::size_t c = 0; c < d; ++c) {
          const double v = w * (xv[(b * k + i) * d + c] - yv[b * d + c]);
          if (gx) gx[(b * k + i) * d + c] += v;
          if (gy) gy[b * d + c] -= v;
        }
      }
    }
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  Mode mode) {
  require_rank("batch_norm", x, 2);
  const auto n = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d || state.running_mean.size() != d) {
    shape_fail("batch_norm", "feature count " + std::to_string(d) + " does not match state of size " +
                                 std::to_string(state.running_mean.size()));
  }
  if (mode == Mode::kTrain && n < 2) {
    throw std::invalid_argument("batch_norm: degenerate batch of size " + std::to_string(n) +
                                " in train mode (need >= 2)");
  }
  const double* xv = x.data().data();
  std::vector<double> mu(d), inv_std(d);
  if (mode == Mode::kTrain) {
    std::vector<double> var(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) mu[c] = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) mu[c] += xv[r * d + c];
    }
    for (std::size_t c = 0; c < d; ++c) mu[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = xv[r * d + c] - mu[c];
        var[c] += diff * diff;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double biased = var[c] / static_cast<double>(n);
      inv_std[c] = 1.0 / std::sqrt(biased + state.eps);
      const double unbiased = var[c] / static_cast<double>(n - 1);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu[c];
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < d; ++c) {
      mu[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }
  std::vector<double> xhat(n * d), out(n * d);
  const double* g = gamma.data().data();
  const double* bt = beta.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xv[r * d + c] - mu[c]) * inv_std[c];
      xhat[r * d + c] = h;
      out[r * d + c] = g[c] * h + bt[c];
    }
  }
  const bool train = mode == Mode::kTrain;
  return record("batch_norm", {n, d}, std::move(out), {x, gamma, beta},
                [n, d, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                  const double* gv = self.parents[1]->value.data();
                  if (double* gg = grad_of(self, 1)) {
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < d; ++c) gg[c] += self.grad[r * d + c] * xhat[r * d + c];
                    }
                  }
                  if (double* gb = grad_of(self, 2)) {
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < d; ++c) gb[c] += self.grad[r * d + c];
                    }
                  }
                  double* gx = grad_of(self, 0);
                  if (!gx) return;
                  if (!train) {
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += self.grad[r * d + c] * gv[c] * inv_std[c];
                    }
                    return;
                  }
                  std::vector<double> sum_g(d, 0.0), sum_gh(d, 0.0);
                  for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < d; ++c) {
                      const double dh = self.grad[r * d + c] * gv[c];
                      sum_g[c] += dh;
                      sum_gh[c] += dh * xhat[r * d + c];
                    }
                  }
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < d; ++c) {
                      const double dh = self.grad[r * d + c] * gv[c];
                      gx[r * d + c] += inv_std[c] * (dh - inv_n * sum_g[c] - xhat[r * d + c] * inv_n * sum_gh[c]);
                    }
                  }
                });
}

}  // namespace divsample::ops
