#include "tramp/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tramp/errors.h"

namespace tramp {

namespace {

std::atomic<bool> g_checked{false};

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

// Shape of the broadcast result when one operand's shape is a suffix of the
// other's. Returns the repeat period of the shorter operand.
struct Broadcast {
  Shape out;
  std::size_t period_a;
  std::size_t period_b;
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast broadcast(const char* op, const Shape& a, const Shape& b) {
  if (is_suffix(b, a)) return {a, numel(a), numel(b)};
  if (is_suffix(a, b)) return {b, numel(a), numel(b)};
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) +
                   " with " + shape_str(b));
}

template <typename F>
DiffTensor unary(const char* op, const DiffTensor& x, F fwd_and_deriv) {
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  std::vector<double> deriv(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    auto [y, dy] = fwd_and_deriv(xv[i]);
    out[i] = y;
    deriv[i] = dy;
  }
  auto xn = x.node();
  return make_op(op, x.shape(), std::move(out), {x},
                 [xn, deriv = std::move(deriv)](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t i = 0; i < gx.size(); ++i) {
                     gx[i] += self.grad[i] * deriv[i];
                   }
                 });
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

void set_checked_mode(bool on) { g_checked = on; }
bool checked_mode() { return g_checked; }

DiffTensor DiffTensor::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("constant: shape " + shape_str(shape) + " needs " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return DiffTensor(std::move(n));
}

DiffTensor DiffTensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

DiffTensor DiffTensor::full(Shape shape, double v) {
  std::vector<double> values(numel(shape), v);
  return constant(std::move(shape), std::move(values));
}

DiffTensor DiffTensor::scalar(double v) { return constant({1}, {v}); }

DiffTensor DiffTensor::leaf(Shape shape, std::vector<double> values) {
  auto t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double DiffTensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

void DiffTensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward() without seed needs a scalar, got " +
                     shape_str(shape()));
  }
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void DiffTensor::backward(std::span<const double> seed) const {
  if (seed.size() != size()) {
    throw ShapeError("backward seed size mismatch");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; reverse of it is a valid topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  auto& g = node_->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

DiffTensor make_op(const char* op, Shape shape, std::vector<double> value,
                   std::vector<DiffTensor> parents,
                   std::function<void(Node&)> backward) {
  if (g_checked) check_finite(op, value);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return DiffTensor(std::move(n));
}

// -- shape ------------------------------------------------------------------

DiffTensor reshape(const DiffTensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " +
                     shape_str(shape));
  }
  auto xn = x.node();
  return make_op("reshape", std::move(shape), xn->value, {x},
                 [xn](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t i = 0; i < gx.size(); ++i) {
                     gx[i] += self.grad[i];
                   }
                 });
}

DiffTensor transpose_last2(const DiffTensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last2: rank < 2");
  Shape s = x.shape();
  const std::size_t r = s[s.size() - 2];
  const std::size_t c = s[s.size() - 1];
  const std::size_t batch = x.size() / (r * c);
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = xv.data() + b * r * c;
    double* dst = out.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  auto xn = x.node();
  return make_op("transpose", std::move(s), std::move(out), {x},
                 [xn, r, c, batch](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t b = 0; b < batch; ++b) {
                     const double* g = self.grad.data() + b * r * c;
                     double* dst = gx.data() + b * r * c;
                     for (std::size_t i = 0; i < r; ++i) {
                       for (std::size_t j = 0; j < c; ++j) {
                         dst[i * c + j] += g[j * r + i];
                       }
                     }
                   }
                 });
}

DiffTensor gather_rows(const DiffTensor& x, std::size_t row_size,
                       std::span<const std::size_t> indices, Shape out_shape) {
  if (row_size == 0 || x.size() % row_size != 0) {
    throw ShapeError("gather_rows: row size " + std::to_string(row_size) +
                     " does not divide " + shape_str(x.shape()));
  }
  const std::size_t rows = x.size() / row_size;
  if (numel(out_shape) != indices.size() * row_size) {
    throw ShapeError("gather_rows: output shape " + shape_str(out_shape) +
                     " does not hold " + std::to_string(indices.size()) +
                     " rows");
  }
  const auto& xv = x.node()->value;
  std::vector<double> out(indices.size() * row_size);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw ShapeError("gather_rows: index out of range");
    std::copy_n(xv.data() + indices[i] * row_size, row_size,
                out.data() + i * row_size);
  }
  auto xn = x.node();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op("gather_rows", std::move(out_shape), std::move(out), {x},
                 [xn, row_size, idx = std::move(idx)](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t i = 0; i < idx.size(); ++i) {
                     const double* g = self.grad.data() + i * row_size;
                     double* dst = gx.data() + idx[i] * row_size;
                     for (std::size_t j = 0; j < row_size; ++j) dst[j] += g[j];
                   }
                 });
}

DiffTensor slice_lastdim(const DiffTensor& x, std::size_t begin,
                         std::size_t len) {
  if (x.rank() == 0) throw ShapeError("slice_lastdim: rank 0");
  const std::size_t width = x.shape().back();
  if (begin + len > width || len == 0) {
    throw ShapeError("slice_lastdim: [" + std::to_string(begin) + ", +" +
                     std::to_string(len) + ") out of " + std::to_string(width));
  }
  const std::size_t rows = x.size() / width;
  Shape s = x.shape();
  s.back() = len;
  const auto& xv = x.node()->value;
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * width + begin, len, out.data() + r * len);
  }
  auto xn = x.node();
  return make_op("slice", std::move(s), std::move(out), {x},
                 [xn, rows, width, begin, len](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t j = 0; j < len; ++j) {
                       gx[r * width + begin + j] += self.grad[r * len + j];
                     }
                   }
                 });
}

DiffTensor concat_lastdim(const std::vector<DiffTensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_lastdim: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  const std::size_t rows = numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape l = p.shape();
    const std::size_t w = l.back();
    l.pop_back();
    if (l != lead) throw ShapeError("concat_lastdim: leading shapes differ");
    widths.push_back(w);
    total += w;
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].node()->value;
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * widths[k], widths[k],
                  out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape s = lead;
  s.push_back(total);
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op("concat", std::move(s), std::move(out), parts,
                 [nodes, widths, rows, total](Node& self) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < nodes.size(); ++k) {
                     if (nodes[k]->requires_grad) {
                       auto& g = nodes[k]->grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < widths[k]; ++j) {
                           g[r * widths[k] + j] +=
                               self.grad[r * total + off + j];
                         }
                       }
                     }
                     off += widths[k];
                   }
                 });
}

// -- elementwise --------------------------------------------------------------

namespace {

enum class BinOp { kAdd, kSub, kMul };

DiffTensor binary(const char* name, BinOp op, const DiffTensor& a,
                  const DiffTensor& b) {
  const Broadcast bc = broadcast(name, a.shape(), b.shape());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  const std::size_t n = numel(bc.out);
  const std::size_t pa = bc.period_a;
  const std::size_t pb = bc.period_b;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i % pa];
    const double y = bv[i % pb];
    switch (op) {
      case BinOp::kAdd: out[i] = x + y; break;
      case BinOp::kSub: out[i] = x - y; break;
      case BinOp::kMul: out[i] = x * y; break;
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op(name, bc.out, std::move(out), {a, b},
                 [an, bn, op, pa, pb, n](Node& self) {
                   const auto& g = self.grad;
                   if (an->requires_grad) {
                     auto& ga = an->grad_buffer();
                     for (std::size_t i = 0; i < n; ++i) {
                       ga[i % pa] += op == BinOp::kMul
                                         ? g[i] * bn->value[i % pb]
                                         : g[i];
                     }
                   }
                   if (bn->requires_grad) {
                     auto& gb = bn->grad_buffer();
                     for (std::size_t i = 0; i < n; ++i) {
                       switch (op) {
                         case BinOp::kAdd: gb[i % pb] += g[i]; break;
                         case BinOp::kSub: gb[i % pb] -= g[i]; break;
                         case BinOp::kMul:
                           gb[i % pb] += g[i] * an->value[i % pa];
                           break;
                       }
                     }
                   }
                 });
}

}  // namespace

DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  return binary("add", BinOp::kAdd, a, b);
}
DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  return binary("sub", BinOp::kSub, a, b);
}
DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  return binary("mul", BinOp::kMul, a, b);
}

DiffTensor scale(const DiffTensor& x, double c) {
  return unary("scale", x, [c](double v) { return std::pair{c * v, c}; });
}

DiffTensor square(const DiffTensor& x) {
  return unary("square", x, [](double v) { return std::pair{v * v, 2 * v}; });
}

DiffTensor gelu(const DiffTensor& x) {
  return unary("gelu", x, [](double v) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    const double cdf = 0.5 * std::erfc(-v * kInvSqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return std::pair{v * cdf, cdf + v * pdf};
  });
}

// -- reductions ---------------------------------------------------------------

DiffTensor sum(const DiffTensor& x) {
  const auto& xv = x.node()->value;
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  auto xn = x.node();
  return make_op("sum", {1}, {s}, {x}, [xn](Node& self) {
    auto& gx = xn->grad_buffer();
    for (double& g : gx) g += self.grad[0];
  });
}

DiffTensor mean(const DiffTensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

DiffTensor sum_squares(const DiffTensor& x) {
  const auto& xv = x.node()->value;
  double s = 0.0;
  for (double v : xv) s += v * v;
  auto xn = x.node();
  return make_op("sum_squares", {1}, {s}, {x}, [xn](Node& self) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += 2.0 * xn->value[i] * self.grad[0];
    }
  });
}

DiffTensor mean_axis(const DiffTensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("mean_axis: axis out of range");
  const Shape& s = x.shape();
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  const std::size_t len = s[axis];
  const std::size_t inner = x.size() / (outer * len);
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) os.push_back(s[i]);
  }
  if (os.empty()) os.push_back(1);
  const auto& xv = x.node()->value;
  std::vector<double> out(outer * inner, 0.0);
  const double w = 1.0 / static_cast<double>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < len; ++a) {
      const double* src = xv.data() + (o * len + a) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (double& v : out) v *= w;
  auto xn = x.node();
  return make_op("mean_axis", std::move(os), std::move(out), {x},
                 [xn, outer, len, inner, w](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t o = 0; o < outer; ++o) {
                     const double* g = self.grad.data() + o * inner;
                     for (std::size_t a = 0; a < len; ++a) {
                       double* dst = gx.data() + (o * len + a) * inner;
                       for (std::size_t i = 0; i < inner; ++i) {
                         dst[i] += w * g[i];
                       }
                     }
                   }
                 });
}

// -- linear algebra -----------------------------------------------------------

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul: operands need rank >= 2, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  if (sb[sb.size() - 2] != k) {
    throw ShapeError("matmul: inner dimensions differ in " + shape_str(sa) +
                     " x " + shape_str(sb));
  }

  // Broadcast batch dimensions right-aligned.
  const Shape ba(sa.begin(), sa.end() - 2);
  const Shape bb(sb.begin(), sb.end() - 2);
  const std::size_t nb = std::max(ba.size(), bb.size());
  Shape batch(nb);
  std::vector<std::size_t> stride_a(nb, 0), stride_b(nb, 0);
  {
    std::size_t acc_a = m * k, acc_b = k * n;
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t pos = nb - 1 - i;
      const std::size_t da = i < ba.size() ? ba[ba.size() - 1 - i] : 1;
      const std::size_t db = i < bb.size() ? bb[bb.size() - 1 - i] : 1;
      if (da != db && da != 1 && db != 1) {
        throw ShapeError("matmul: batch dimensions not broadcastable in " +
                         shape_str(sa) + " x " + shape_str(sb));
      }
      batch[pos] = std::max(da, db);
      stride_a[pos] = da == 1 ? 0 : acc_a;
      stride_b[pos] = db == 1 ? 0 : acc_b;
      acc_a *= da;
      acc_b *= db;
    }
  }
  const std::size_t nbatch = numel(batch);
  std::vector<std::size_t> off_a(nbatch), off_b(nbatch);
  for (std::size_t idx = 0; idx < nbatch; ++idx) {
    std::size_t rem = idx, oa = 0, ob = 0;
    for (std::size_t d = nb; d-- > 0;) {
      const std::size_t coord = rem % batch[d];
      rem /= batch[d];
      oa += coord * stride_a[d];
      ob += coord * stride_b[d];
    }
    off_a[idx] = oa;
    off_b[idx] = ob;
  }

  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<double> out(nbatch * m * n, 0.0);
  for (std::size_t idx = 0; idx < nbatch; ++idx) {
    const double* A = av.data() + off_a[idx];
    const double* B = bv.data() + off_b[idx];
    double* C = out.data() + idx * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double* brow = B + p * n;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }

  Shape so = batch;
  so.push_back(m);
  so.push_back(n);
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      "matmul", std::move(so), std::move(out), {a, b},
      [an, bn, off_a = std::move(off_a), off_b = std::move(off_b), m, k,
       n](Node& self) {
        const std::size_t nbatch = off_a.size();
        for (std::size_t idx = 0; idx < nbatch; ++idx) {
          const double* G = self.grad.data() + idx * m * n;
          if (an->requires_grad) {
            // dA = G * B^T
            double* dA = an->grad_buffer().data() + off_a[idx];
            const double* B = bn->value.data() + off_b[idx];
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                  acc += G[i * n + j] * B[p * n + j];
                }
                dA[i * k + p] += acc;
              }
            }
          }
          if (bn->requires_grad) {
            // dB = A^T * G
            double* dB = bn->grad_buffer().data() + off_b[idx];
            const double* A = an->value.data() + off_a[idx];
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                double* drow = dB + p * n;
                const double* grow = G + i * n;
                for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
              }
            }
          }
        }
      });
}

// -- normalisation ------------------------------------------------------------

DiffTensor softmax_lastdim(const DiffTensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax_lastdim: rank 0");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * width;
    double* dst = out.data() + r * width;
    const double mx = *std::max_element(src, src + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      dst[j] = std::exp(src[j] - mx);
      z += dst[j];
    }
    for (std::size_t j = 0; j < width; ++j) dst[j] /= z;
  }
  auto xn = x.node();
  return make_op("softmax", x.shape(), std::move(out), {x},
                 [xn, rows, width](Node& self) {
                   auto& gx = xn->grad_buffer();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* s = self.value.data() + r * width;
                     const double* g = self.grad.data() + r * width;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < width; ++j) dot += g[j] * s[j];
                     for (std::size_t j = 0; j < width; ++j) {
                       gx[r * width + j] += s[j] * (g[j] - dot);
                     }
                   }
                 });
}

DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain,
                      const DiffTensor& bias, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: rank 0");
  const std::size_t width = x.shape().back();
  if (gain.size() != width || bias.size() != width) {
    throw ShapeError("layer_norm: gain/bias must have " +
                     std::to_string(width) + " entries");
  }
  const std::size_t rows = x.size() / width;
  const auto& xv = x.node()->value;
  const auto& gv = gain.node()->value;
  const auto& bv = bias.node()->value;
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += src[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (src[j] - mu) * (src[j] - mu);
    var /= static_cast<double>(width);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const double h = (src[j] - mu) * rstd[r];
      xhat[r * width + j] = h;
      out[r * width + j] = h * gv[j] + bv[j];
    }
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return make_op(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [xn, gn, bn, rows, width, xhat = std::move(xhat),
       rstd = std::move(rstd)](Node& self) {
        const double inv_w = 1.0 / static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * width;
          const double* h = xhat.data() + r * width;
          if (gn->requires_grad) {
            auto& gg = gn->grad_buffer();
            for (std::size_t j = 0; j < width; ++j) gg[j] += g[j] * h[j];
          }
          if (bn->requires_grad) {
            auto& gb = bn->grad_buffer();
            for (std::size_t j = 0; j < width; ++j) gb[j] += g[j];
          }
          if (xn->requires_grad) {
            double mean_d = 0.0, mean_dh = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              const double d = g[j] * gn->value[j];
              mean_d += d;
              mean_dh += d * h[j];
            }
            mean_d *= inv_w;
            mean_dh *= inv_w;
            auto& gx = xn->grad_buffer();
            for (std::size_t j = 0; j < width; ++j) {
              const double d = g[j] * gn->value[j];
              gx[r * width + j] += rstd[r] * (d - mean_d - h[j] * mean_dh);
            }
          }
        }
      });
}

DiffTensor linear(const DiffTensor& x, const DiffTensor& w,
                  const DiffTensor& b) {
  return add(matmul(x, w), b);
}

}  // namespace tramp
