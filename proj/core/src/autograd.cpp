#include "desnow/autograd.hpp"

#include "desnow/error.hpp"

namespace desnow {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->nodes_[id_].value;
}

const Tensor& BackwardContext::input(std::size_t i) const {
  const auto& node = tape_.nodes_[node_];
  return tape_.nodes_[node.inputs.at(i)].value;
}

Tensor* BackwardContext::input_grad(std::size_t i) {
  auto& in = tape_.nodes_[tape_.nodes_[node_].inputs.at(i)];
  if (!in.requires_grad) return nullptr;
  if (in.grad.empty()) in.grad = Tensor::zeros(in.value.shape());
  return &in.grad;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, true, &p, {}, {}});
  bound_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    check_owner(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  const auto root = loss.id();
  if (nodes_[root].value.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + to_string(nodes_[root].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root].requires_grad) return;
  nodes_[root].grad = Tensor::full(nodes_[root].value.shape(), 1.0);

  for (std::size_t i = root + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) {
      BackwardContext ctx(*this, i);
      ctx.grad_out_ = &node.grad;
      ctx.out_ = &node.value;
      node.backward(ctx);
    }
    if (node.param) {
      if (node.param->grad.shape() != node.param->value.shape()) node.param->zero_grad();
      node.param->grad += node.grad;
    }
  }
}

const Tensor& Tape::value(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

Tensor Tape::grad(const Var& v) const {
  check_owner(v);
  const auto& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor::zeros(n.value.shape()) : n.grad;
}

bool Tape::requires_grad(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

void Tape::check_owner(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw std::logic_error("Var does not belong to this tape");
  }
}

}  // namespace desnow
