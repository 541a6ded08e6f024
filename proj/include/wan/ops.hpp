#pragma once

#include "wan/tensor.hpp"

namespace wan::ops {

enum class Padding { Same, Valid };

// Cross-correlation. Same padding splits the total as before = total/2 (floor),
// after = total - before. Output extent: (H + pad_total - kh)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int64_t stride,
              Padding padding);

// window == stride; extents must divide evenly. Ties go to the first maximum
// in row-major window order.
Tensor max_pool2d(const Tensor& input, int64_t window = 2);

Tensor avg_pool2d(const Tensor& input, int64_t window);

// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& input);

// Rational scale factor; H*num and W*num must divide evenly by den and the
// resulting extents must be positive. align-corners-false sampling.
Tensor resize_bilinear(const Tensor& input, int64_t factor_num, int64_t factor_den);

Tensor upsample_nearest(const Tensor& input, int64_t factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);

// input [N,F] x weight [F,G] + bias [G]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& input);
Tensor leaky_relu(const Tensor& input, double alpha);
// Output clamped to [eps, 1-eps] so downstream logs are finite.
Tensor sigmoid(const Tensor& input);
inline constexpr double kSigmoidEps = 1e-7;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, double factor);
Tensor sum(const Tensor& input);
Tensor mean(const Tensor& input);

// Mean over all elements of -[y log p + (1-y) log(1-p)], p clamped by eps.
// Labels outside [0,1] violate the contract.
Tensor bce(const Tensor& pred, const Tensor& label);

}  // namespace wan::ops
