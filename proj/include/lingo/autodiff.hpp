#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// Operations are recorded eagerly on the active Tape (see TapeScope) when at
// least one input requires a gradient. Without an active tape every
// primitive runs as a plain forward computation, which is what inference
// paths such as beam search use.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lingo/rng.hpp"

namespace lingo::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access, for optimizers and finite differences only.
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad();
  void clear_grad();

  // Deep copy of values; keeps requires_grad, drops any gradient.
  Tensor clone() const;
  void assign(const Tensor& other);  // copy values in place, shapes must match

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

enum class Primitive {
  kMatmul,
  kAdd,
  kScalarMul,
  kHadamard,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftmax,
  kLogSoftmax,
  kEmbeddingLookup,
  kConcat,
  kSum,
  kMean,
  kSpatialConv,
  kSquare,
  kNegate,
  kLog,
  kReciprocal,
  kReshape,
};

inline constexpr Primitive kAllPrimitives[] = {
    Primitive::kMatmul,     Primitive::kAdd,        Primitive::kScalarMul,
    Primitive::kHadamard,   Primitive::kRelu,       Primitive::kTanh,
    Primitive::kSigmoid,    Primitive::kSoftmax,    Primitive::kLogSoftmax,
    Primitive::kEmbeddingLookup, Primitive::kConcat, Primitive::kSum,
    Primitive::kMean,       Primitive::kSpatialConv, Primitive::kSquare,
    Primitive::kNegate,     Primitive::kLog,        Primitive::kReciprocal,
    Primitive::kReshape,
};

std::string_view primitive_name(Primitive op);

struct PrimitiveArgs {
  std::size_t axis = 0;              // softmax, log-softmax, concat, sum, mean
  double scalar = 1.0;               // scalar-mul
  std::vector<std::size_t> indices;  // embedding-lookup rows
  Shape shape;                       // reshape target; embedding output override
};

// Generic entry point; the named functions below forward here.
Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs,
                       const PrimitiveArgs& args = {});

// [m,k] x [k] -> [m]   or   [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);  // add(a, negate(b))
Tensor scalar_mul(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis = 0);
Tensor log_softmax(const Tensor& a, std::size_t axis = 0);
// table [V,E]; returns [n,E]
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);
// table [V,E]; returns the single row as [E]
Tensor embedding_lookup(const Tensor& table, std::size_t id);
Tensor concat(std::span<const Tensor> parts, std::size_t axis = 0);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis = 0);
Tensor sum(const Tensor& a, std::size_t axis = 0);
Tensor mean(const Tensor& a, std::size_t axis = 0);
// input [C,H,W], filter [O,C,kh,kw] with odd kernel sides; zero "same"
// padding, cross-correlation; returns [O,H,W]
Tensor spatial_conv(const Tensor& input, const Tensor& filter);
Tensor square(const Tensor& a);
Tensor negate(const Tensor& a);
Tensor log(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Forward-identical copy that never propagates gradient to its input.
Tensor stop_gradient(const Tensor& x);

class Tape {
 public:
  struct Entry {
    Primitive op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Populates grad of every requires_grad tensor reachable from loss.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  bool consumed() const { return consumed_; }

  void record(Entry entry);

  static Tape* active();

 private:
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

// Makes a tape the active recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for the current thread (inference inside a taped pass).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

inline void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

struct Zeros {};
struct Constant {
  double value;
};
struct Uniform {
  double scale;  // samples in (-scale, scale)
  std::uint64_t seed;
};
struct Normal {
  double sigma;
  std::uint64_t seed;
};
using Init = std::variant<Zeros, Constant, Uniform, Normal>;

Tensor build_tensor(const Shape& shape, const Init& init, bool requires_grad = false);
// Draws from a shared generator; used when initializing a whole model.
Tensor uniform_tensor(const Shape& shape, double scale, Rng& rng, bool requires_grad = true);

// accumulator += grad^2; param -= lr * grad / (sqrt(accumulator) + eps);
// then clears grads.
void adagrad_step(std::span<Tensor> params, double lr, std::span<Tensor> accumulators,
                  double eps);

class Adagrad {
 public:
  Adagrad(std::vector<Tensor> params, double lr, double eps);

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  double eps() const { return eps_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& accumulators() { return accumulators_; }
  const std::vector<Tensor>& accumulators() const { return accumulators_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> accumulators_;
  double lr_;
  double eps_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h);
// Same, with respect to tensors that f reads by reference (model parameters).
double finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                         double h);

}  // namespace lingo::ad
