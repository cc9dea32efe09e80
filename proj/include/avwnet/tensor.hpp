#pragma once

// Dense float64 tensors with tape-free reverse-mode differentiation.
//
// Every Tensor is a handle to a graph node. Operations on tensors that
// require gradients record their inputs and a backward closure; backward()
// on a scalar result topologically orders the reachable nodes and runs the
// closures in reverse. Leaf gradients accumulate until zero_grad().

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avwnet {

using Shape = std::vector<std::int64_t>;

std::int64_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}

// One entry per operation input; null when that input needs no gradient.
using GradientSinks = std::vector<std::vector<double>*>;
using BackwardFn = std::function<void(std::span<const double> grad_output,
                                      const GradientSinks& grad_inputs)>;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const;

  std::span<const double> values() const;
  // Writable view; only leaves may be mutated (optimizer steps, perturbation).
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Populates grads of every requires_grad leaf reachable from this scalar.
  // The traversed part of the graph is released afterwards; calling backward
  // again through it throws GraphError.
  void backward() const;

  // Same values, no history, no gradient.
  Tensor detach() const;

  bool all_finite() const;
  // Throws NumericError naming `what` if any value is NaN/Inf.
  void check_finite(std::string_view what) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            BackwardFn);
};

// Builds the output of a differentiable operation. When no input requires a
// gradient (or recording is disabled) the result is a plain constant and
// `backward` is dropped.
Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& inputs, BackwardFn backward);

bool grad_recording_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace avwnet
