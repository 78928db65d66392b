#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"
#include "nn/ops.hpp"

namespace planformer::test {

struct GradCheck {
  double max_rel = 0.0;
  int checked = 0;
  int kinks = 0;  // entries whose central interval straddles a ReLU kink
  double max_rel_kink = 0.0;  // worst one-sided error among those
};

/// Compares reverse-mode gradients of a scalar loss with central differences.
/// Relative error is |a - n| / max(|a|, |n|, floor); `floor` guards entries
/// whose true gradient is essentially zero. Tensors with more than
/// `max_per_tensor` entries are spot-checked at random indices. With the
/// default floor, a near-zero entry passes when its absolute error is <= 1e-9.
///
/// With `kink_tol` > 0, an entry whose central difference misses is re-tested
/// with second-order one-sided differences (same step) on each side. If one
/// side matches within kink_tol the interval straddled a non-differentiable
/// point (ReLU at 0) on the other side; the entry is counted in `kinks` and
/// scored with the matching one-sided estimate.
inline GradCheck grad_check(const std::function<nn::Tensor()>& loss_fn, std::vector<nn::Tensor> inputs, Rng& rng,
                            int max_per_tensor = 64, double h = 1e-5, double floor = 1e-5, double kink_tol = 0.0) {
  for (auto& t : inputs) t.zero_grad();
  nn::backward(loss_fn());
  GradCheck out;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> idx;
    if (t.size() <= static_cast<std::size_t>(max_per_tensor)) {
      for (std::size_t i = 0; i < t.size(); ++i) idx.push_back(i);
    } else {
      for (int k = 0; k < max_per_tensor; ++k) idx.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(t.size()) - 1)));
    }
    auto data = t.data();
    for (std::size_t i : idx) {
      const double saved = data[i];
      double plus, minus;
      {
        nn::NoGradGuard guard;
        data[i] = saved + h;
        plus = loss_fn().item();
        data[i] = saved - h;
        minus = loss_fn().item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      auto rel = [&](double n) { return std::abs(analytic[i] - n) / std::max({std::abs(analytic[i]), std::abs(n), floor}); };
      double err = rel(numeric);
      if (kink_tol > 0.0 && err > kink_tol) {
        double at, plus2, minus2;
        {
          nn::NoGradGuard guard;
          at = loss_fn().item();
          data[i] = saved + 2.0 * h;
          plus2 = loss_fn().item();
          data[i] = saved - 2.0 * h;
          minus2 = loss_fn().item();
        }
        data[i] = saved;
        const double right = (-3.0 * at + 4.0 * plus - plus2) / (2.0 * h);
        const double left = (3.0 * at - 4.0 * minus + minus2) / (2.0 * h);
        const double one_sided = std::min(rel(right), rel(left));
        if (one_sided <= kink_tol) {
          ++out.kinks;
          out.max_rel_kink = std::max(out.max_rel_kink, one_sided);
          continue;
        }
      }
      out.max_rel = std::max(out.max_rel, err);
      ++out.checked;
    }
  }
  return out;
}

inline nn::Tensor random_tensor(const nn::Shape& shape, Rng& rng, bool requires_grad = true, double scale = 1.0) {
  std::vector<double> v(nn::numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return nn::Tensor::from(shape, std::move(v), requires_grad);
}

/// Scalar probe: sum(x * r) for a fixed random r, so every output entry matters.
inline nn::Tensor probe(const nn::Tensor& x, const nn::Tensor& r) { return nn::sum(nn::mul(x, r)); }

}  // namespace planformer::test
