//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/tape.h"

#include "hamforge/error.h"

namespace hamforge::diff {

Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::kShapeMismatch, "tape is full");
  nodes_.push_back({ std::move(value), nullptr, Matrix(), requires_grad, std::move(backward) });
  return { this, static_cast<std::uint32_t>(nodes_.size() - 1) };
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::parameter(const Matrix &external, bool requires_grad) {
  Var v = push(Matrix(), requires_grad, nullptr);
  nodes_.back().external = &external;
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p: parents) {
    if (p.tape() != this)
      throw Error(ErrorCode::kShapeMismatch, "operand belongs to a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
}

Var Tape::record(Matrix value, const std::vector<Var> &parents, BackwardFn backward) {
  bool needs = false;
  for (Var p: parents) {
    if (p.tape() != this)
      throw Error(ErrorCode::kShapeMismatch, "operand belongs to a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
}

void Tape::accumulate(Var target, const Matrix &grad) {
  Node &node = nodes_[target.id()];
  if (!node.requires_grad)
    return;
  const Matrix &value = node.external != nullptr ? *node.external : node.value;
  if (grad.rows() != value.rows() || grad.cols() != value.cols())
    throw Error(ErrorCode::kShapeMismatch, "gradient shape differs from value shape");
  if (node.grad.size() == 0)
    node.grad = grad;
  else
    node.grad += grad;
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw Error(ErrorCode::kShapeMismatch, "backward() without a seed needs a scalar root");
  backward(root, Matrix::Ones(1, 1));
}

void Tape::backward(Var root, const Matrix &seed) {
  accumulate(root, seed);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node &node = nodes_[i];
    if (!node.backward || node.grad.size() == 0)
      continue;
    node.backward(*this, node.grad);
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace hamforge::diff
