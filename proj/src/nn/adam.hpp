#pragma once

#include <vector>

#include "nn/tensor.hpp"

namespace planformer::nn {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update over `params` using their accumulated gradients.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace planformer::nn
