#include <algorithm>
#include <sstream>

#include "lingo/autodiff.hpp"
#include "lingo/errors.hpp"

namespace lingo::ad {

namespace {
thread_local Tape* active_tape = nullptr;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

static void validate_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidShapeError("tensor shape must be nonempty");
  for (std::size_t d : shape) {
    if (d == 0) throw InvalidShapeError("tensor dimension must be >= 1, got " + shape_string(shape));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw InvalidShapeError("tensor of shape " + shape_string(shape) + " given " +
                            std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_node(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape()) + " is not scalar");
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::clear_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const { return Tensor(node_->shape, node_->value, node_->requires_grad); }

void Tensor::assign(const Tensor& other) {
  if (other.shape() != shape()) {
    throw ShapeError("assign: " + shape_string(other.shape()) + " into " + shape_string(shape()));
  }
  node_->value = other.node_->value;
}

// ---------------------------------------------------------------------------

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

Tape* Tape::active() { return active_tape; }

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw StaleTapeError("backward called twice without resetting the tape");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  consumed_ = true;
  if (!loss.requires_grad()) return;  // loss does not depend on any parameter
  if (entries_.empty()) {
    // loss is itself a leaf
    auto& g = loss.node()->grad;
    if (g.empty()) g.assign(1, 0.0);
    g[0] += 1.0;
    return;
  }
  loss.node()->grad.assign(1, 1.0);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
TapeScope::~TapeScope() { active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(active_tape) { active_tape = nullptr; }
NoGradScope::~NoGradScope() { active_tape = previous_; }

// ---------------------------------------------------------------------------

Tensor build_tensor(const Shape& shape, const Init& init, bool requires_grad) {
  validate_shape(shape);
  std::vector<double> values(shape_size(shape), 0.0);
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, Constant>) {
          std::fill(values.begin(), values.end(), spec.value);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          Rng rng(spec.seed);
          for (double& v : values) v = rng.uniform(-spec.scale, spec.scale);
        } else if constexpr (std::is_same_v<T, Normal>) {
          Rng rng(spec.seed);
          for (double& v : values) v = spec.sigma * rng.normal();
        }
      },
      init);
  return Tensor(shape, std::move(values), requires_grad);
}

Tensor uniform_tensor(const Shape& shape, double scale, Rng& rng, bool requires_grad) {
  validate_shape(shape);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(-scale, scale);
  return Tensor(shape, std::move(values), requires_grad);
}

}  // namespace lingo::ad
