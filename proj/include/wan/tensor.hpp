#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "wan/common.hpp"

namespace wan {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
};

}  // namespace detail

// Value-semantics handle over a shared autodiff node. Copies alias the same
// storage; ops record the graph only while gradients are enabled and at least
// one input requires them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t rank() const { return static_cast<int64_t>(shape().size()); }
  int64_t dim(int64_t i) const;
  int64_t numel() const;

  const double* data() const;
  double* data();
  const std::vector<double>& values() const;
  std::vector<double>& values();

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  bool has_grad() const;
  // Allocates a zero gradient buffer on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad_view() const;
  void zero_grad();      // deallocates the buffer
  double item() const;   // scalar tensors only

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Scoped gradient-recording switch (thread-local). Forward passes made inside
// the guard build no graph, so activations free as soon as handles drop.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Reverse-mode sweep from a scalar root. Intermediate gradients are reset
// before the sweep; leaf gradients accumulate across calls until zero_grad.
void backward(const Tensor& root);

}  // namespace wan
