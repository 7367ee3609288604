//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/nn.h"

#include <fmt/format.h>

#include "hamforge/error.h"

namespace hamforge::diff {

Var linear(Var x, Var w, Var b) { return add(matmul(x, w), b); }

void add_mlp_spec(std::vector<ParamSpec> &spec, const std::string &prefix,
                  const std::vector<Eigen::Index> &widths) {
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    spec.push_back({ fmt::format("{}.W{}", prefix, k), widths[k], widths[k + 1] });
    spec.push_back({ fmt::format("{}.b{}", prefix, k), 1, widths[k + 1], ParamKind::kBias });
  }
}

Var mlp(ParamBinding &p, const std::string &prefix, Var x, std::size_t layers) {
  for (std::size_t k = 0; k < layers; ++k) {
    x = linear(x, p[fmt::format("{}.W{}", prefix, k)], p[fmt::format("{}.b{}", prefix, k)]);
    if (k + 1 < layers)
      x = relu(x);
  }
  return x;
}

void add_lstm_spec(std::vector<ParamSpec> &spec, const std::string &prefix, Eigen::Index in,
                   Eigen::Index hidden) {
  spec.push_back({ prefix + ".Wx", in, 4 * hidden });
  spec.push_back({ prefix + ".Wh", hidden, 4 * hidden });
  spec.push_back({ prefix + ".b", 1, 4 * hidden, ParamKind::kBias });
}

Var lstm_sequence(ParamBinding &p, const std::string &prefix, Var x,
                  std::span<const std::size_t> order) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  if (order.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "lstm order length differs from input rows");
  Var wh = p[prefix + ".Wh"];
  const Eigen::Index hidden = wh.rows();
  Tape &t = p.tape();

  // input projections for all rows at once
  Var xw = add(matmul(x, p[prefix + ".Wx"]), p[prefix + ".b"]);
  Var h = t.constant(Matrix::Zero(1, hidden));
  Var c = t.constant(Matrix::Zero(1, hidden));
  std::vector<Var> outputs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = static_cast<Eigen::Index>(order[k]);
    Var gates = add(slice_rows(xw, row, 1), matmul(h, wh));
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, hidden));
    Var g = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    outputs[order[k]] = h;
  }
  return concat(std::span<const Var>(outputs), 0);
}

void add_gru_spec(std::vector<ParamSpec> &spec, const std::string &prefix, Eigen::Index in,
                  Eigen::Index hidden) {
  spec.push_back({ prefix + ".Wx", in, 3 * hidden });
  spec.push_back({ prefix + ".Wh", hidden, 3 * hidden });
  spec.push_back({ prefix + ".bx", 1, 3 * hidden, ParamKind::kBias });
  spec.push_back({ prefix + ".bh", 1, 3 * hidden, ParamKind::kBias });
}

Var gru_cell(ParamBinding &p, const std::string &prefix, Var x, Var h) {
  Var wh = p[prefix + ".Wh"];
  const Eigen::Index hidden = wh.rows();
  Var gx = linear(x, p[prefix + ".Wx"], p[prefix + ".bx"]);
  Var gh = linear(h, wh, p[prefix + ".bh"]);
  Var r = sigmoid(add(slice_cols(gx, 0, hidden), slice_cols(gh, 0, hidden)));
  Var z = sigmoid(add(slice_cols(gx, hidden, hidden), slice_cols(gh, hidden, hidden)));
  Var n = tanh(add(slice_cols(gx, 2 * hidden, hidden), mul(r, slice_cols(gh, 2 * hidden, hidden))));
  // h' = (1 - z) n + z h = n + z (h - n)
  return add(n, mul(z, sub(h, n)));
}

}  // namespace hamforge::diff
