#include "wan/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace wan {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check(d > 0, "shape extents must be positive");
    n *= d;
  }
  return n;
}

static std::shared_ptr<detail::Node> make_node(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->values.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return node;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return wrap(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = make_node(std::move(shape), requires_grad);
  std::fill(node->values.begin(), node->values.end(), value);
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  check(shape_numel(shape) == static_cast<int64_t>(values.size()),
        "Tensor::from_data: value count does not match shape");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  check(defined(), "undefined tensor");
  return node_->shape;
}

int64_t Tensor::dim(int64_t i) const {
  const Shape& s = shape();
  check(i >= 0 && i < static_cast<int64_t>(s.size()), "Tensor::dim: index out of range");
  return s[static_cast<size_t>(i)];
}

int64_t Tensor::numel() const {
  check(defined(), "undefined tensor");
  return node_->numel();
}

const double* Tensor::data() const { return values().data(); }
double* Tensor::data() { return values().data(); }

const std::vector<double>& Tensor::values() const {
  check(defined(), "undefined tensor");
  return node_->values;
}

std::vector<double>& Tensor::values() {
  check(defined(), "undefined tensor");
  return node_->values;
}

bool Tensor::requires_grad() const {
  check(defined(), "undefined tensor");
  return node_->requires_grad;
}

void Tensor::set_requires_grad(bool rg) {
  check(defined(), "undefined tensor");
  check(node_->inputs.empty(), "set_requires_grad: only leaf tensors may be toggled");
  node_->requires_grad = rg;
}

bool Tensor::has_grad() const {
  check(defined(), "undefined tensor");
  return !node_->grad.empty();
}

std::vector<double>& Tensor::grad() {
  check(defined(), "undefined tensor");
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad_view() const {
  check(has_grad(), "gradient not populated");
  return node_->grad;
}

void Tensor::zero_grad() {
  check(defined(), "undefined tensor");
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

double Tensor::item() const {
  check(defined() && numel() == 1, "Tensor::item: tensor is not scalar");
  return node_->values[0];
}

namespace {
thread_local int no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

bool grad_enabled() { return no_grad_depth == 0; }

void backward(const Tensor& root) {
  check(root.defined(), "backward: undefined root");
  check(root.numel() == 1, "backward: root must be scalar");
  check(root.requires_grad(), "backward: root does not require gradients");

  // Iterative post-order DFS; the reversed order is a topological order from
  // the root, so each node's backward_fn runs exactly once, after every
  // consumer has contributed to its gradient.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node(), 0});
  visited.insert(root.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      detail::Node* in = f.node->inputs[f.next_input++].get();
      if (in->requires_grad && visited.insert(in).second) stack.push_back({in, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : topo) {
    if (!n->inputs.empty()) {
      n->grad.assign(n->values.size(), 0.0);  // intermediates never accumulate across sweeps
    } else if (n->grad.empty()) {
      n->grad.assign(n->values.size(), 0.0);
    }
  }
  root.node()->grad[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace wan
