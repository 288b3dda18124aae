#include <algorithm>
#include <cmath>

#include "lingo/autodiff.hpp"
#include "lingo/errors.hpp"

namespace lingo::ad {

double finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractError("finite_diff_check: h must lie in [1e-7, 1e-3]");
  std::vector<std::vector<double>> analytic;
  for (Tensor& p : params) {
    p.clear_grad();
    p.set_requires_grad(true);
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor y = f();
    if (y.size() != 1) {
      throw ContractError("finite_diff_check: function must be scalar-valued, got shape " +
                          shape_string(y.shape()));
    }
    tape.backward(y);
  }
  for (Tensor& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
    p.clear_grad();
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h) {
  Tensor input = x.clone();
  input.set_requires_grad(true);
  Tensor params[] = {input};
  return finite_diff_check([&] { return f(input); }, params, h);
}

}  // namespace lingo::ad
