#include "wan/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace wan {

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor>& inputs, double h) {
  for (Tensor& t : inputs) t.zero_grad();
  Tensor y = f(inputs);
  check(y.defined() && y.numel() == 1, "grad_check: f must return a scalar");
  backward(y);

  std::vector<std::vector<double>> analytic;
  for (Tensor& t : inputs)
    analytic.push_back(t.requires_grad() ? t.grad_view() : std::vector<double>{});

  double max_err = 0.0;
  NoGradGuard no_grad;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    std::vector<double>& vals = inputs[i].values();
    for (size_t j = 0; j < vals.size(); ++j) {
      const double orig = vals[j];
      vals[j] = orig + h;
      const double up = f(inputs).item();
      vals[j] = orig - h;
      const double down = f(inputs).item();
      vals[j] = orig;
      const double cd = (up - down) / (2.0 * h);
      const double an = analytic[i][j];
      const double err = std::abs(an - cd) / std::max({std::abs(an), std::abs(cd), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace wan
