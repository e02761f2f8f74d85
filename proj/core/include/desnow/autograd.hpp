#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "desnow/tensor.hpp"

namespace desnow {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value once allocated

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward function sees: the output gradient and mutable input gradients.
class BackwardContext {
 public:
  const Tensor& grad_output() const { return *grad_out_; }
  const Tensor& output() const { return *out_; }
  const Tensor& input(std::size_t i) const;
  /// Gradient buffer for input i, or nullptr when that input needs no gradient.
  Tensor* input_grad(std::size_t i);

 private:
  friend class Tape;
  BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}
  Tape& tape_;
  std::size_t node_;
  const Tensor* grad_out_ = nullptr;
  const Tensor* out_ = nullptr;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Linear record of differentiable operations for one forward pass.
///
/// backward() walks the record in exact reverse order. Gradients of bound
/// Parameters are *added* to Parameter::grad, so repeated backward calls (or
/// several tapes sharing parameters) accumulate until the caller zeroes them.
/// Single-threaded by contract.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that receives a gradient but is not tied to a Parameter.
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter; binding the same Parameter twice returns the same Var.
  Var parameter(Parameter& p);

  /// Append an operation result. The node requires a gradient iff any input does.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  void backward(const Var& loss);

  const Tensor& value(const Var& v) const;
  /// Gradient of the last backward() w.r.t. v (zeros if v was unreachable).
  Tensor grad(const Var& v) const;
  bool requires_grad(const Var& v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;
  friend class BackwardContext;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  void check_owner(const Var& v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

}  // namespace desnow
