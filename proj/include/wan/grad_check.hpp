#pragma once

#include <functional>
#include <vector>

#include "wan/tensor.hpp"

namespace wan {

// Central-difference verification of reverse-mode gradients. f must return a
// scalar; every input with requires_grad set is perturbed elementwise.
// Returns max over elements of |analytic - cd| / max(|analytic|, |cd|, 1e-8).
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace wan
