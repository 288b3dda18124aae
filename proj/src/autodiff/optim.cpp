#include <cmath>

#include "lingo/autodiff.hpp"
#include "lingo/errors.hpp"

namespace lingo::ad {

void adagrad_step(std::span<Tensor> params, double lr, std::span<Tensor> accumulators,
                  double eps) {
  if (!(lr > 0.0)) throw ContractError("adagrad_step: lr must be positive");
  if (!(eps > 0.0)) throw ContractError("adagrad_step: eps must be positive");
  if (params.size() != accumulators.size()) {
    throw ContractError("adagrad_step: one accumulator per parameter required");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].has_grad()) {
      throw UninitializedGradientError("adagrad_step: parameter " + std::to_string(p) +
                                       " of shape " + shape_string(params[p].shape()) +
                                       " has no gradient");
    }
    if (accumulators[p].shape() != params[p].shape()) {
      throw ShapeError("adagrad_step: accumulator shape " +
                       shape_string(accumulators[p].shape()) + " vs parameter " +
                       shape_string(params[p].shape()));
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto value = params[p].mutable_values();
    auto acc = accumulators[p].mutable_values();
    const auto grad = params[p].grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      acc[i] += g * g;
      value[i] -= lr * g / (std::sqrt(acc[i]) + eps);
    }
    params[p].clear_grad();
  }
}

Adagrad::Adagrad(std::vector<Tensor> params, double lr, double eps)
    : params_(std::move(params)), lr_(lr), eps_(eps) {
  if (!(lr > 0.0)) throw ContractError("Adagrad: lr must be positive");
  if (!(eps > 0.0)) throw ContractError("Adagrad: eps must be positive");
  accumulators_.reserve(params_.size());
  for (const Tensor& p : params_) accumulators_.push_back(build_tensor(p.shape(), Zeros{}));
}

void Adagrad::step() { adagrad_step(params_, lr_, accumulators_, eps_); }

void Adagrad::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace lingo::ad
