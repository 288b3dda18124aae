#include <algorithm>
#include <cmath>
#include <numeric>

#include "lingo/autodiff.hpp"
#include "lingo/errors.hpp"

namespace lingo::ad {

namespace {

using BackwardFn = std::function<void(const Node& out, std::span<Node* const> in)>;

// Gradient buffer of an input, or nullptr when it does not take gradient.
double* grad_of(Node* node) {
  if (!node->requires_grad) return nullptr;
  if (node->grad.empty()) node->grad.assign(node->value.size(), 0.0);
  return node->grad.data();
}

Tensor emit(Primitive op, std::initializer_list<const Tensor*> inputs, Shape shape,
            std::vector<double> value, BackwardFn backward) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->value = std::move(value);
  Tape* tape = Tape::active();
  bool needs = false;
  if (tape) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    out->requires_grad = true;
    Tape::Entry entry;
    entry.op = op;
    std::vector<Node*> raw;
    raw.reserve(inputs.size());
    for (const Tensor* t : inputs) {
      entry.inputs.push_back(t->node());
      raw.push_back(t->node().get());
    }
    entry.output = out;
    Node* out_raw = out.get();
    entry.backward = [fn = std::move(backward), out_raw, raw = std::move(raw)]() {
      fn(*out_raw, raw);
    };
    tape->record(std::move(entry));
  }
  return Tensor::from_node(std::move(out));
}

Tensor emit_n(Primitive op, std::span<const Tensor> inputs, Shape shape,
              std::vector<double> value, BackwardFn backward) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->value = std::move(value);
  Tape* tape = Tape::active();
  bool needs = false;
  if (tape) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    out->requires_grad = true;
    Tape::Entry entry;
    entry.op = op;
    std::vector<Node*> raw;
    for (const Tensor& t : inputs) {
      entry.inputs.push_back(t.node());
      raw.push_back(t.node().get());
    }
    entry.output = out;
    Node* out_raw = out.get();
    entry.backward = [fn = std::move(backward), out_raw, raw = std::move(raw)]() {
      fn(*out_raw, raw);
    };
    tape->record(std::move(entry));
  }
  return Tensor::from_node(std::move(out));
}

void require_same_shape(std::string_view name, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(std::string_view name, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw InvalidAxisError(std::string(name) + ": axis " + std::to_string(axis) +
                           " out of range for shape " + shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <class F, class D>
Tensor unary(Primitive op, const Tensor& a, F forward, D derivative) {
  const auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return emit(op, {&a}, a.shape(), std::move(y),
              [derivative](const Node& out, std::span<Node* const> in) {
                double* gx = grad_of(in[0]);
                if (!gx) return;
                const auto& xs = in[0]->value;
                for (std::size_t i = 0; i < xs.size(); ++i) {
                  gx[i] += out.grad[i] * derivative(xs[i], out.value[i]);
                }
              });
}

}  // namespace

std::string_view primitive_name(Primitive op) {
  switch (op) {
    case Primitive::kMatmul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kScalarMul: return "scalar-mul";
    case Primitive::kHadamard: return "hadamard";
    case Primitive::kRelu: return "relu";
    case Primitive::kTanh: return "tanh";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLogSoftmax: return "log-softmax";
    case Primitive::kEmbeddingLookup: return "embedding-lookup";
    case Primitive::kConcat: return "concat";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kSpatialConv: return "spatial-conv";
    case Primitive::kSquare: return "square";
    case Primitive::kNegate: return "negate";
    case Primitive::kLog: return "log";
    case Primitive::kReciprocal: return "reciprocal";
    case Primitive::kReshape: return "reshape";
  }
  return "unknown";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
  const double* A = a.values().data();
  const double* B = b.values().data();
  std::vector<double> c(m * n, 0.0);
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = A + i * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * B[p];
      c[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        const double* brow = B + p * n;
        double* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  Shape shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  return emit(Primitive::kMatmul, {&a, &b}, std::move(shape), std::move(c),
              [m, k, n](const Node& out, std::span<Node* const> in) {
                const double* G = out.grad.data();
                const double* A = in[0]->value.data();
                const double* B = in[1]->value.data();
                if (double* gA = grad_of(in[0])) {
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                      const double g = G[i * n + j];
                      if (g == 0.0) continue;
                      double* garow = gA + i * k;
                      for (std::size_t p = 0; p < k; ++p) garow[p] += g * B[p * n + j];
                    }
                  }
                }
                if (double* gB = grad_of(in[1])) {
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                      const double av = A[i * k + p];
                      double* gbrow = gB + p * n;
                      const double* grow = G + i * n;
                      for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                    }
                  }
                }
              });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  return emit(Primitive::kAdd, {&a, &b}, a.shape(), std::move(z),
              [](const Node& out, std::span<Node* const> in) {
                for (Node* node : in) {
                  if (double* g = grad_of(node)) {
                    for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
                  }
                }
              });
}

Tensor subtract(const Tensor& a, const Tensor& b) { return add(a, negate(b)); }

Tensor scalar_mul(const Tensor& a, double s) {
  return unary(
      Primitive::kScalarMul, a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  return emit(Primitive::kHadamard, {&a, &b}, a.shape(), std::move(z),
              [](const Node& out, std::span<Node* const> in) {
                const auto& x = in[0]->value;
                const auto& y = in[1]->value;
                if (double* gx = grad_of(in[0])) {
                  for (std::size_t i = 0; i < x.size(); ++i) gx[i] += out.grad[i] * y[i];
                }
                if (double* gy = grad_of(in[1])) {
                  for (std::size_t i = 0; i < y.size(); ++i) gy[i] += out.grad[i] * x[i];
                }
              });
}

Tensor relu(const Tensor& a) {
  return unary(
      Primitive::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      Primitive::kTanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      Primitive::kSigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& a) {
  return unary(
      Primitive::kSquare, a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor negate(const Tensor& a) {
  return unary(
      Primitive::kNegate, a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw DomainError("log: nonpositive input " + std::to_string(x));
  }
  return unary(
      Primitive::kLog, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor reciprocal(const Tensor& a) {
  for (double x : a.values()) {
    if (x == 0.0) throw DomainError("reciprocal: zero input");
  }
  return unary(
      Primitive::kReciprocal, a, [](double x) { return 1.0 / x; },
      [](double, double y) { return -y * y; });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = split_axis("softmax", a.shape(), axis);
  const auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, x[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(x[base + j * s.inner] - mx);
        y[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) y[base + j * s.inner] /= z;
    }
  }
  return emit(Primitive::kSoftmax, {&a}, a.shape(), std::move(y),
              [s](const Node& out, std::span<Node* const> in) {
                double* gx = grad_of(in[0]);
                if (!gx) return;
                for (std::size_t o = 0; o < s.outer; ++o) {
                  for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t base = o * s.n * s.inner + i;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < s.n; ++j) {
                      dot += out.grad[base + j * s.inner] * out.value[base + j * s.inner];
                    }
                    for (std::size_t j = 0; j < s.n; ++j) {
                      const std::size_t idx = base + j * s.inner;
                      gx[idx] += out.value[idx] * (out.grad[idx] - dot);
                    }
                  }
                }
              });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto s = split_axis("log-softmax", a.shape(), axis);
  const auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, x[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) z += std::exp(x[base + j * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < s.n; ++j) y[base + j * s.inner] = x[base + j * s.inner] - lse;
    }
  }
  return emit(Primitive::kLogSoftmax, {&a}, a.shape(), std::move(y),
              [s](const Node& out, std::span<Node* const> in) {
                double* gx = grad_of(in[0]);
                if (!gx) return;
                for (std::size_t o = 0; o < s.outer; ++o) {
                  for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t base = o * s.n * s.inner + i;
                    double gsum = 0.0;
                    for (std::size_t j = 0; j < s.n; ++j) gsum += out.grad[base + j * s.inner];
                    for (std::size_t j = 0; j < s.n; ++j) {
                      const std::size_t idx = base + j * s.inner;
                      gx[idx] += out.grad[idx] - std::exp(out.value[idx]) * gsum;
                    }
                  }
                }
              });
}

static Tensor embedding_impl(const Tensor& table, std::vector<std::size_t> ids, Shape shape) {
  if (table.rank() != 2) {
    throw ShapeError("embedding-lookup: table must be [V,E], got " + shape_string(table.shape()));
  }
  if (ids.empty()) throw ShapeError("embedding-lookup: no ids");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  const auto t = table.values();
  std::vector<double> y(ids.size() * width);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= rows) {
      throw ShapeError("embedding-lookup: id " + std::to_string(ids[r]) + " out of range for " +
                       shape_string(table.shape()));
    }
    std::copy_n(t.data() + ids[r] * width, width, y.data() + r * width);
  }
  if (shape.empty()) shape = {ids.size(), width};
  if (shape_size(shape) != y.size()) {
    throw ShapeError("embedding-lookup: output shape " + shape_string(shape) + " does not hold " +
                     std::to_string(y.size()) + " values");
  }
  return emit(Primitive::kEmbeddingLookup, {&table}, std::move(shape), std::move(y),
              [ids = std::move(ids), width](const Node& out, std::span<Node* const> in) {
                double* gt = grad_of(in[0]);
                if (!gt) return;
                for (std::size_t r = 0; r < ids.size(); ++r) {
                  double* row = gt + ids[r] * width;
                  for (std::size_t j = 0; j < width; ++j) row[j] += out.grad[r * width + j];
                }
              });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  return embedding_impl(table, std::vector<std::size_t>(ids.begin(), ids.end()), {});
}

Tensor embedding_lookup(const Tensor& table, std::size_t id) {
  if (table.rank() != 2) {
    throw ShapeError("embedding-lookup: table must be [V,E], got " + shape_string(table.shape()));
  }
  return embedding_impl(table, {id}, {table.dim(1)});
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  split_axis("concat", first, axis);
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_string(first) + " and " +
                       shape_string(s) + " along axis " + std::to_string(axis));
    }
    shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t total = shape[axis];
  std::vector<double> y(shape_size(shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].values();
    const std::size_t w = widths[k];
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(x.data() + o * w * inner, w * inner, y.data() + (o * total + offset) * inner);
    }
    offset += w;
  }
  return emit_n(Primitive::kConcat, parts, std::move(shape), std::move(y),
                [widths, outer, inner, total](const Node& out, std::span<Node* const> in) {
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < in.size(); ++k) {
                    const std::size_t w = widths[k];
                    if (double* g = grad_of(in[k])) {
                      for (std::size_t o = 0; o < outer; ++o) {
                        const double* src = out.grad.data() + (o * total + offset) * inner;
                        double* dst = g + o * w * inner;
                        for (std::size_t j = 0; j < w * inner; ++j) dst[j] += src[j];
                      }
                    }
                    offset += w;
                  }
                });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

static Tensor reduce(Primitive op, const Tensor& a, std::size_t axis, double scale) {
  const auto s = split_axis(primitive_name(op), a.shape(), axis);
  const auto x = a.values();
  std::vector<double> y(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        y[o * s.inner + i] += x[(o * s.n + j) * s.inner + i];
      }
    }
  }
  for (double& v : y) v *= scale;
  return emit(op, {&a}, drop_axis(a.shape(), axis), std::move(y),
              [s, scale](const Node& out, std::span<Node* const> in) {
                double* gx = grad_of(in[0]);
                if (!gx) return;
                for (std::size_t o = 0; o < s.outer; ++o) {
                  for (std::size_t j = 0; j < s.n; ++j) {
                    for (std::size_t i = 0; i < s.inner; ++i) {
                      gx[(o * s.n + j) * s.inner + i] += scale * out.grad[o * s.inner + i];
                    }
                  }
                }
              });
}

Tensor sum(const Tensor& a, std::size_t axis) { return reduce(Primitive::kSum, a, axis, 1.0); }

Tensor mean(const Tensor& a, std::size_t axis) {
  split_axis("mean", a.shape(), axis);
  return reduce(Primitive::kMean, a, axis, 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor spatial_conv(const Tensor& input, const Tensor& filter) {
  if (input.rank() != 3 || filter.rank() != 4 || filter.dim(1) != input.dim(0) ||
      filter.dim(2) % 2 == 0 || filter.dim(3) % 2 == 0) {
    throw ShapeError("spatial-conv: input " + shape_string(input.shape()) + " and filter " +
                     shape_string(filter.shape()) +
                     " do not conform ([C,H,W] with [O,C,kh,kw], odd kernel)");
  }
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t O = filter.dim(0), KH = filter.dim(2), KW = filter.dim(3);
  const long ph = static_cast<long>(KH / 2), pw = static_cast<long>(KW / 2);
  const auto x = input.values();
  const auto f = filter.values();
  std::vector<double> y(O * H * W, 0.0);
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t dy = 0; dy < KH; ++dy)
          for (std::size_t dx = 0; dx < KW; ++dx) {
            const std::size_t fi = ((o * C + c) * KH + dy) * KW + dx;
            for (std::size_t r = 0; r < H; ++r) {
              const long sr = static_cast<long>(r) + static_cast<long>(dy) - ph;
              if (sr < 0 || sr >= static_cast<long>(H)) continue;
              for (std::size_t q = 0; q < W; ++q) {
                const long sq = static_cast<long>(q) + static_cast<long>(dx) - pw;
                if (sq < 0 || sq >= static_cast<long>(W)) continue;
                fn((o * H + r) * W + q, (c * H + static_cast<std::size_t>(sr)) * W +
                                            static_cast<std::size_t>(sq),
                   fi);
              }
            }
          }
  };
  for_each_tap([&](std::size_t yi, std::size_t xi, std::size_t fi) { y[yi] += f[fi] * x[xi]; });
  return emit(Primitive::kSpatialConv, {&input, &filter}, {O, H, W}, std::move(y),
              [for_each_tap](const Node& out, std::span<Node* const> in) {
                double* gx = grad_of(in[0]);
                double* gf = grad_of(in[1]);
                const auto& xv = in[0]->value;
                const auto& fv = in[1]->value;
                for_each_tap([&](std::size_t yi, std::size_t xi, std::size_t fi) {
                  const double g = out.grad[yi];
                  if (gx) gx[xi] += fv[fi] * g;
                  if (gf) gf[fi] += xv[xi] * g;
                });
              });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape.empty() || shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw InvalidShapeError("reshape: zero dimension in " + shape_string(shape));
  }
  std::vector<double> y(a.values().begin(), a.values().end());
  return emit(Primitive::kReshape, {&a}, std::move(shape), std::move(y),
              [](const Node& out, std::span<Node* const> in) {
                if (double* g = grad_of(in[0])) {
                  for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
                }
              });
}

Tensor stop_gradient(const Tensor& x) {
  return Tensor(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), false);
}

Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs, const PrimitiveArgs& args) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(primitive_name(op)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (op) {
    case Primitive::kMatmul: need(2); return matmul(inputs[0], inputs[1]);
    case Primitive::kAdd: need(2); return add(inputs[0], inputs[1]);
    case Primitive::kScalarMul: need(1); return scalar_mul(inputs[0], args.scalar);
    case Primitive::kHadamard: need(2); return hadamard(inputs[0], inputs[1]);
    case Primitive::kRelu: need(1); return relu(inputs[0]);
    case Primitive::kTanh: need(1); return tanh(inputs[0]);
    case Primitive::kSigmoid: need(1); return sigmoid(inputs[0]);
    case Primitive::kSoftmax: need(1); return softmax(inputs[0], args.axis);
    case Primitive::kLogSoftmax: need(1); return log_softmax(inputs[0], args.axis);
    case Primitive::kEmbeddingLookup:
      need(1);
      return embedding_impl(inputs[0], args.indices, args.shape);
    case Primitive::kConcat: return concat(inputs, args.axis);
    case Primitive::kSum: need(1); return sum(inputs[0], args.axis);
    case Primitive::kMean: need(1); return mean(inputs[0], args.axis);
    case Primitive::kSpatialConv: need(2); return spatial_conv(inputs[0], inputs[1]);
    case Primitive::kSquare: need(1); return square(inputs[0]);
    case Primitive::kNegate: need(1); return negate(inputs[0]);
    case Primitive::kLog: need(1); return log(inputs[0]);
    case Primitive::kReciprocal: need(1); return reciprocal(inputs[0]);
    case Primitive::kReshape: need(1); return reshape(inputs[0], args.shape);
  }
  throw ShapeError("unknown primitive");
}

}  // namespace lingo::ad
