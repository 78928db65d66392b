#include "nn/adam.hpp"

#include <cmath>

#include "common.hpp"

namespace planformer::nn {

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::kDimensionMismatch, "adam: parameter count changed");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].data();
    const auto grad = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != value.size()) fail(ErrorCode::kDimensionMismatch, "adam: moment buffer shape mismatch");
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      value[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace planformer::nn
