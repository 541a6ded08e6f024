#include "wan/ops.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "wan/kernels.hpp"

namespace wan::ops {

namespace {

using detail::Node;

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

bool wants_graph(std::initializer_list<const Tensor*> ins) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : ins) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor make_op_result(Shape shape, const char* op, std::initializer_list<const Tensor*> ins) {
  const bool rg = wants_graph(ins);
  Tensor out = Tensor::zeros(std::move(shape), rg);
  out.node()->op = op;
  if (rg) {
    for (const Tensor* t : ins) {
      if (t->defined()) out.node()->inputs.push_back(t->handle());
    }
  }
  return out;
}

// Gradient buffer of an input node, allocated on demand.
double* grad_of(const std::shared_ptr<Node>& n) {
  if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
  return n->grad.data();
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int64_t stride,
              Padding padding) {
  check(input.defined() && kernel.defined() && bias.defined(), "conv2d: undefined argument");
  check(input.rank() == 4, "conv2d: input must be rank 4, got " + shape_str(input.shape()));
  check(kernel.rank() == 4, "conv2d: kernel must be rank 4");
  check(bias.rank() == 1 && bias.dim(0) == kernel.dim(0), "conv2d: bias must be [out_channels]");
  check(stride >= 1, "conv2d: stride must be >= 1");
  check(input.dim(1) == kernel.dim(1),
        "conv2d: input channels " + std::to_string(input.dim(1)) + " do not match kernel " +
            std::to_string(kernel.dim(1)));

  kernels::ConvGeom g;
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_ch = kernel.dim(0);
  g.k_h = kernel.dim(2);
  g.k_w = kernel.dim(3);
  g.stride = stride;
  int64_t pad_h = 0, pad_w = 0;
  if (padding == Padding::Same) {
    // Output covers ceil(H/stride) positions; pad splits floor-first.
    const int64_t out_h = (g.in_h + stride - 1) / stride;
    const int64_t out_w = (g.in_w + stride - 1) / stride;
    pad_h = std::max<int64_t>(0, (out_h - 1) * stride + g.k_h - g.in_h);
    pad_w = std::max<int64_t>(0, (out_w - 1) * stride + g.k_w - g.in_w);
  }
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  check(g.k_h <= g.in_h + pad_h && g.k_w <= g.in_w + pad_w,
        "conv2d: kernel larger than padded input");
  g.out_h = (g.in_h + pad_h - g.k_h) / stride + 1;
  g.out_w = (g.in_w + pad_w - g.k_w) / stride + 1;

  Tensor out = make_op_result({g.batch, g.out_ch, g.out_h, g.out_w}, "conv2d",
                              {&input, &kernel, &bias});
  kernels::conv2d_forward(input.data(), kernel.data(), bias.data(), out.data(), g);

  if (out.requires_grad()) {
    auto in_n = input.handle();
    auto k_n = kernel.handle();
    auto b_n = bias.handle();
    out.node()->backward_fn = [g, in_n, k_n, b_n](Node& self) {
      const double* d_out = self.grad.data();
      if (in_n->requires_grad)
        kernels::conv2d_backward_input(d_out, k_n->values.data(), grad_of(in_n), g);
      if (k_n->requires_grad)
        kernels::conv2d_backward_weight(d_out, in_n->values.data(), grad_of(k_n), g);
      if (b_n->requires_grad) kernels::conv2d_backward_bias(d_out, grad_of(b_n), g);
    };
  }
  return out;
}

Tensor max_pool2d(const Tensor& input, int64_t window) {
  check(input.defined() && input.rank() == 4, "max_pool2d: input must be rank 4");
  check(window >= 1, "max_pool2d: window must be >= 1");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check(h % window == 0 && w % window == 0,
        "max_pool2d: extents " + shape_str(input.shape()) + " not divisible by window " +
            std::to_string(window));
  Tensor out = make_op_result({n, c, h / window, w / window}, "max_pool2d", {&input});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  kernels::maxpool_forward(input.data(), out.data(), argmax.data(), n, c, h, w, window);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, c, h, w, window, in_n,
                               arg = std::move(argmax)](Node& self) {
      kernels::maxpool_backward(self.grad.data(), arg.data(), grad_of(in_n), n, c, h, w, window);
    };
  }
  return out;
}

Tensor avg_pool2d(const Tensor& input, int64_t window) {
  check(input.defined() && input.rank() == 4, "avg_pool2d: input must be rank 4");
  check(window >= 1, "avg_pool2d: window must be >= 1");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check(h % window == 0 && w % window == 0, "avg_pool2d: extents not divisible by window");
  Tensor out = make_op_result({n, c, h / window, w / window}, "avg_pool2d", {&input});
  kernels::avgpool_forward(input.data(), out.data(), n, c, h, w, window);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, c, h, w, window, in_n](Node& self) {
      kernels::avgpool_backward(self.grad.data(), grad_of(in_n), n, c, h, w, window);
    };
  }
  return out;
}

Tensor global_avg_pool(const Tensor& input) {
  check(input.defined() && input.rank() == 4, "global_avg_pool: input must be rank 4");
  const int64_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out = make_op_result({n, c}, "global_avg_pool", {&input});
  const double inv = 1.0 / static_cast<double>(hw);
  for (int64_t p = 0; p < n * c; ++p) {
    const double* src = input.data() + p * hw;
    double acc = 0.0;
    for (int64_t i = 0; i < hw; ++i) acc += src[i];
    out.data()[p] = acc * inv;
  }
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, c, hw, inv, in_n](Node& self) {
      double* din = grad_of(in_n);
      for (int64_t p = 0; p < n * c; ++p) {
        const double g = self.grad[static_cast<size_t>(p)] * inv;
        double* dst = din + p * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] += g;
      }
    };
  }
  return out;
}

Tensor resize_bilinear(const Tensor& input, int64_t factor_num, int64_t factor_den) {
  check(input.defined() && input.rank() == 4, "resize_bilinear: input must be rank 4");
  check(factor_num >= 1 && factor_den >= 1, "resize_bilinear: factor must be positive");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check((h * factor_num) % factor_den == 0 && (w * factor_num) % factor_den == 0,
        "resize_bilinear: factor " + std::to_string(factor_num) + "/" +
            std::to_string(factor_den) + " does not yield integer extents for " +
            shape_str(input.shape()));
  const int64_t oh = h * factor_num / factor_den;
  const int64_t ow = w * factor_num / factor_den;
  check(oh > 0 && ow > 0, "resize_bilinear: zero output extent");
  if (oh == h && ow == w) {
    Tensor out = make_op_result(input.shape(), "resize_bilinear", {&input});
    out.values() = input.values();
    if (out.requires_grad()) {
      auto in_n = input.handle();
      out.node()->backward_fn = [in_n](Node& self) {
        double* din = grad_of(in_n);
        for (size_t i = 0; i < self.grad.size(); ++i) din[i] += self.grad[i];
      };
    }
    return out;
  }
  Tensor out = make_op_result({n, c, oh, ow}, "resize_bilinear", {&input});
  kernels::bilinear_forward(input.data(), out.data(), n, c, h, w, oh, ow);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, c, h, w, oh, ow, in_n](Node& self) {
      kernels::bilinear_backward(self.grad.data(), grad_of(in_n), n, c, h, w, oh, ow);
    };
  }
  return out;
}

Tensor upsample_nearest(const Tensor& input, int64_t factor) {
  check(input.defined() && input.rank() == 4, "upsample_nearest: input must be rank 4");
  check(factor >= 1, "upsample_nearest: factor must be >= 1");
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out = make_op_result({n, c, h * factor, w * factor}, "upsample_nearest", {&input});
  kernels::nearest_up_forward(input.data(), out.data(), n, c, h, w, factor);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, c, h, w, factor, in_n](Node& self) {
      kernels::nearest_up_backward(self.grad.data(), grad_of(in_n), n, c, h, w, factor);
    };
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined(), "concat_channels: undefined argument");
  check(a.rank() == 4 && b.rank() == 4, "concat_channels: inputs must be rank 4");
  check(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
        "concat_channels: mismatched extents " + shape_str(a.shape()) + " vs " +
            shape_str(b.shape()));
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor out = make_op_result({n, ca + cb, a.dim(2), a.dim(3)}, "concat_channels", {&a, &b});
  double* dst = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const double* pa = a.data() + i * ca * hw;
    const double* pb = b.data() + i * cb * hw;
    double* po = dst + i * (ca + cb) * hw;
    std::copy(pa, pa + ca * hw, po);
    std::copy(pb, pb + cb * hw, po + ca * hw);
  }
  if (out.requires_grad()) {
    auto a_n = a.handle();
    auto b_n = b.handle();
    out.node()->backward_fn = [n, ca, cb, hw, a_n, b_n](Node& self) {
      const double* g = self.grad.data();
      double* da = a_n->requires_grad ? grad_of(a_n) : nullptr;
      double* db = b_n->requires_grad ? grad_of(b_n) : nullptr;
      for (int64_t i = 0; i < n; ++i) {
        const double* gi = g + i * (ca + cb) * hw;
        if (da) {
          double* d = da + i * ca * hw;
          for (int64_t j = 0; j < ca * hw; ++j) d[j] += gi[j];
        }
        if (db) {
          double* d = db + i * cb * hw;
          for (int64_t j = 0; j < cb * hw; ++j) d[j] += gi[ca * hw + j];
        }
      }
    };
  }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  check(input.defined() && weight.defined() && bias.defined(), "dense: undefined argument");
  check(input.rank() == 2 && weight.rank() == 2 && bias.rank() == 1, "dense: bad ranks");
  check(input.dim(1) == weight.dim(0),
        "dense: inner dimensions disagree: " + shape_str(input.shape()) + " vs " +
            shape_str(weight.shape()));
  check(bias.dim(0) == weight.dim(1), "dense: bias extent must match output features");
  const int64_t n = input.dim(0), in_f = input.dim(1), out_f = weight.dim(1);
  Tensor out = make_op_result({n, out_f}, "dense", {&input, &weight, &bias});
  kernels::dense_forward(input.data(), weight.data(), bias.data(), out.data(), n, in_f, out_f);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    auto w_n = weight.handle();
    auto b_n = bias.handle();
    out.node()->backward_fn = [n, in_f, out_f, in_n, w_n, b_n](Node& self) {
      const double* d_out = self.grad.data();
      if (in_n->requires_grad)
        kernels::dense_backward_input(d_out, w_n->values.data(), grad_of(in_n), n, in_f, out_f);
      if (w_n->requires_grad)
        kernels::dense_backward_weight(d_out, in_n->values.data(), grad_of(w_n), n, in_f, out_f);
      if (b_n->requires_grad) kernels::dense_backward_bias(d_out, grad_of(b_n), n, out_f);
    };
  }
  return out;
}

namespace {

Tensor unary_elementwise(const Tensor& input, const char* op,
                         const std::function<double(double)>& fwd,
                         std::function<void(const Node&, const std::shared_ptr<Node>&)> bwd) {
  check(input.defined(), "activation: undefined input");
  Tensor out = make_op_result(input.shape(), op, {&input});
  const double* src = input.data();
  double* dst = out.data();
  const int64_t n = input.numel();
  for (int64_t i = 0; i < n; ++i) dst[i] = fwd(src[i]);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [in_n, bwd = std::move(bwd)](Node& self) { bwd(self, in_n); };
  }
  return out;
}

}  // namespace

Tensor relu(const Tensor& input) { return leaky_relu(input, 0.0); }

Tensor leaky_relu(const Tensor& input, double alpha) {
  return unary_elementwise(
      input, "leaky_relu", [alpha](double x) { return x >= 0.0 ? x : alpha * x; },
      [alpha](const Node& self, const std::shared_ptr<Node>& in_n) {
        double* din = grad_of(in_n);
        const double* x = in_n->values.data();
        for (size_t i = 0; i < self.grad.size(); ++i)
          din[i] += self.grad[i] * (x[i] >= 0.0 ? 1.0 : alpha);
      });
}

Tensor sigmoid(const Tensor& input) {
  return unary_elementwise(
      input, "sigmoid",
      [](double x) {
        const double p = 1.0 / (1.0 + std::exp(-x));
        return std::min(1.0 - kSigmoidEps, std::max(kSigmoidEps, p));
      },
      [](const Node& self, const std::shared_ptr<Node>& in_n) {
        double* din = grad_of(in_n);
        const double* p = self.values.data();
        for (size_t i = 0; i < self.grad.size(); ++i)
          din[i] += self.grad[i] * p[i] * (1.0 - p[i]);
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.shape() == b.shape(), "add: shape mismatch");
  Tensor out = make_op_result(a.shape(), "add", {&a, &b});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  if (out.requires_grad()) {
    auto a_n = a.handle();
    auto b_n = b.handle();
    out.node()->backward_fn = [a_n, b_n](Node& self) {
      if (a_n->requires_grad) {
        double* d = grad_of(a_n);
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
      }
      if (b_n->requires_grad) {
        double* d = grad_of(b_n);
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.shape() == b.shape(), "sub: shape mismatch");
  Tensor out = make_op_result(a.shape(), "sub", {&a, &b});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  if (out.requires_grad()) {
    auto a_n = a.handle();
    auto b_n = b.handle();
    out.node()->backward_fn = [a_n, b_n](Node& self) {
      if (a_n->requires_grad) {
        double* d = grad_of(a_n);
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
      }
      if (b_n->requires_grad) {
        double* d = grad_of(b_n);
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.shape() == b.shape(), "mul: shape mismatch");
  Tensor out = make_op_result(a.shape(), "mul", {&a, &b});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  if (out.requires_grad()) {
    auto a_n = a.handle();
    auto b_n = b.handle();
    out.node()->backward_fn = [a_n, b_n](Node& self) {
      if (a_n->requires_grad) {
        double* d = grad_of(a_n);
        const double* vb = b_n->values.data();
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * vb[i];
      }
      if (b_n->requires_grad) {
        double* d = grad_of(b_n);
        const double* va = a_n->values.data();
        for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * va[i];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& input, double factor) {
  check(input.defined(), "scale: undefined input");
  Tensor out = make_op_result(input.shape(), "scale", {&input});
  const double* src = input.data();
  double* dst = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) dst[i] = src[i] * factor;
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [factor, in_n](Node& self) {
      double* d = grad_of(in_n);
      for (size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * factor;
    };
  }
  return out;
}

Tensor sum(const Tensor& input) {
  check(input.defined(), "sum: undefined input");
  Tensor out = make_op_result({1}, "sum", {&input});
  double acc = 0.0;
  const double* src = input.data();
  for (int64_t i = 0; i < input.numel(); ++i) acc += src[i];
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [in_n](Node& self) {
      double* d = grad_of(in_n);
      const double g = self.grad[0];
      for (size_t i = 0; i < in_n->values.size(); ++i) d[i] += g;
    };
  }
  return out;
}

Tensor mean(const Tensor& input) {
  check(input.defined(), "mean: undefined input");
  Tensor out = make_op_result({1}, "mean", {&input});
  double acc = 0.0;
  const double* src = input.data();
  const int64_t n = input.numel();
  for (int64_t i = 0; i < n; ++i) acc += src[i];
  out.data()[0] = acc / static_cast<double>(n);
  if (out.requires_grad()) {
    auto in_n = input.handle();
    out.node()->backward_fn = [n, in_n](Node& self) {
      double* d = grad_of(in_n);
      const double g = self.grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) d[i] += g;
    };
  }
  return out;
}

Tensor bce(const Tensor& pred, const Tensor& label) {
  check(pred.defined() && label.defined(), "bce: undefined argument");
  check(pred.shape() == label.shape(), "bce: shape mismatch");
  const double* y = label.data();
  const int64_t n = pred.numel();
  for (int64_t i = 0; i < n; ++i)
    check(y[i] >= 0.0 && y[i] <= 1.0, "bce: label outside [0,1]");

  constexpr double eps = kSigmoidEps;
  Tensor out = make_op_result({1}, "bce", {&pred, &label});
  const double* p = pred.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pc = std::min(1.0 - eps, std::max(eps, p[i]));
    acc -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  out.data()[0] = acc / static_cast<double>(n);

  if (out.requires_grad()) {
    auto p_n = pred.handle();
    auto y_n = label.handle();
    out.node()->backward_fn = [n, p_n, y_n](Node& self) {
      const double g = self.grad[0] / static_cast<double>(n);
      const double* p = p_n->values.data();
      const double* y = y_n->values.data();
      if (p_n->requires_grad) {
        double* d = grad_of(p_n);
        for (int64_t i = 0; i < n; ++i) {
          if (p[i] < kSigmoidEps || p[i] > 1.0 - kSigmoidEps) continue;  // clamp plateau
          d[i] += g * (p[i] - y[i]) / (p[i] * (1.0 - p[i]));
        }
      }
      if (y_n->requires_grad) {
        double* d = grad_of(y_n);
        for (int64_t i = 0; i < n; ++i) {
          const double pc = std::min(1.0 - kSigmoidEps, std::max(kSigmoidEps, p[i]));
          d[i] += g * (std::log(1.0 - pc) - std::log(pc));
        }
      }
    };
  }
  return out;
}

}  // namespace wan::ops
