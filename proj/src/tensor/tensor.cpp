#include "avwnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "avwnet/errors.hpp"

namespace avwnet {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

namespace {

thread_local bool g_recording = true;

void validate_shape(const Shape& shape) {
  for (auto extent : shape) {
    if (extent <= 0) {
      throw ShapeError("tensor extents must be positive, got " + to_string(shape));
    }
  }
}

}  // namespace

std::int64_t element_count(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  const auto n = element_count(shape);
  return from_values(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value),
                     requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (element_count(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("shape " + to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

const detail::Node& Tensor::node() const {
  if (!node_) throw GraphError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  }
  return s[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node().values.size()); }

std::span<const double> Tensor::values() const { return node().values; }

std::span<double> Tensor::mutable_values() {
  if (!node().leaf) throw GraphError("only leaf tensors may be modified in place");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node().values[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
bool Tensor::is_leaf() const { return node().leaf; }
bool Tensor::has_grad() const { return !node().grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw GraphError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  node();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  const auto& root = node();
  if (!root.requires_grad) {
    throw GraphError("backward on a tensor that does not require grad");
  }
  if (root.values.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + to_string(root.shape));
  }
  if (root.released) {
    throw GraphError("backward called twice through the same graph");
  }

  // Iterative post-order DFS; inputs are visited in recorded order so the
  // resulting topological order is deterministic. The order owns its nodes:
  // releasing one node's inputs must not free a node still waiting its turn.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      std::shared_ptr<detail::Node> child = top.first->inputs[top.second++];
      if (!child->requires_grad || visited.count(child.get())) continue;
      if (child->released) {
        throw GraphError("backward through a graph that was already released");
      }
      visited.insert(child.get());
      stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  for (auto& n : order) {
    if (n->grad.size() != n->values.size()) n->grad.assign(n->values.size(), 0.0);
  }
  node_->grad[0] += 1.0;

  GradientSinks sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (n->leaf) continue;
    sinks.assign(n->inputs.size(), nullptr);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      if (n->inputs[i]->requires_grad) sinks[i] = &n->inputs[i]->grad;
    }
    n->backward(n->grad, sinks);
    n->backward = nullptr;
    n->inputs.clear();
    n->inputs.shrink_to_fit();
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->released = true;
  }
}

Tensor Tensor::detach() const {
  return from_values(shape(), node().values, false);
}

bool Tensor::all_finite() const {
  const auto& v = node().values;
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void Tensor::check_finite(std::string_view what) const {
  const auto& v = node().values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + ": non-finite value " + std::to_string(v[i]) +
                         " at flat index " + std::to_string(i));
    }
  }
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   BackwardFn backward) {
  Tensor out = Tensor::from_values(std::move(shape), std::move(values), false);
  if (!g_recording) return out;
  const bool needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                      [](const Tensor& t) { return t.requires_grad(); });
  if (!needs_grad) return out;
  auto& node = *out.node_;
  node.requires_grad = true;
  node.leaf = false;
  node.inputs.reserve(inputs.size());
  for (const auto& t : inputs) node.inputs.push_back(t.node_);
  node.backward = std::move(backward);
  return out;
}

bool grad_recording_enabled() { return g_recording; }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

}  // namespace avwnet
