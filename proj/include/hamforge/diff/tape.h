//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_TAPE_H_
#define HAMFORGE_DIFF_TAPE_H_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <vector>

#include "hamforge/matrix.h"

namespace hamforge::diff {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
  Var() = default;

  const Matrix &value() const;
  // Accumulated gradient after Tape::backward(); an empty matrix when no
  // gradient reached this node.
  const Matrix &grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const { return value()(0, 0); }

  Tape *tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape *tape, std::uint32_t id): tape_(tape), id_(id) { }

  Tape *tape_ = nullptr;
  std::uint32_t id_ = std::numeric_limits<std::uint32_t>::max();
};

// Define-by-run record of operations for reverse-mode differentiation.
//
// Nodes are appended in evaluation order, which is a topological order, so
// backward() walks the node list once from the root towards the leaves.
// A tape is not thread-safe; use one tape per worker.
class Tape {
public:
  // Receives the gradient of the node and accumulates into its parents.
  using BackwardFn = std::function<void(Tape &, const Matrix &)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  // Leaf that reads `external` in place instead of copying it. The matrix
  // must outlive the tape and stay unmodified while the tape is in use.
  Var parameter(const Matrix &external, bool requires_grad = true);

  // Appends an operation result. The node requires a gradient iff any
  // parent does; otherwise `backward` is discarded.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Matrix value, const std::vector<Var> &parents, BackwardFn backward);

  // Seeds d(root)/d(root) = 1; root must be 1 x 1.
  void backward(Var root);
  void backward(Var root, const Matrix &seed);

  void accumulate(Var target, const Matrix &grad);

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const Matrix &value(Var v) const {
    const Node &n = nodes_[v.id()];
    return n.external != nullptr ? *n.external : n.value;
  }
  const Matrix &grad(Var v) const { return nodes_[v.id()].grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

private:
  struct Node {
    Matrix value;
    const Matrix *external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn backward);

  std::vector<Node> nodes_;
};

inline const Matrix &Var::value() const { return tape_->value(*this); }
inline const Matrix &Var::grad() const { return tape_->grad(*this); }

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_TAPE_H_
