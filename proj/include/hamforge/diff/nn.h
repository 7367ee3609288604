//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_NN_H_
#define HAMFORGE_DIFF_NN_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hamforge/diff/ops.h"
#include "hamforge/diff/params.h"

namespace hamforge::diff {

// x W + b, with b a 1 x out row broadcast over the rows of x.
Var linear(Var x, Var w, Var b);

// Fully connected stack: prefix.W{k} (widths[k] x widths[k+1]) and
// prefix.b{k}. relu between layers, no activation on the output.
void add_mlp_spec(std::vector<ParamSpec> &spec, const std::string &prefix,
                  const std::vector<Eigen::Index> &widths);
Var mlp(ParamBinding &p, const std::string &prefix, Var x, std::size_t layers);

// Single-layer LSTM with gate order (i, f, g, o): prefix.Wx (in x 4H),
// prefix.Wh (H x 4H), prefix.b (1 x 4H).
void add_lstm_spec(std::vector<ParamSpec> &spec, const std::string &prefix, Eigen::Index in,
                   Eigen::Index hidden);
// Feeds the rows of x in `order` (a permutation of the rows) and returns the
// hidden state emitted when each row was consumed, in row order.
Var lstm_sequence(ParamBinding &p, const std::string &prefix, Var x,
                  std::span<const std::size_t> order);

// GRU with gate order (r, z, n): prefix.Wx (in x 3H), prefix.Wh (H x 3H),
// prefix.bx, prefix.bh (1 x 3H). Rows of x and h are independent cells.
void add_gru_spec(std::vector<ParamSpec> &spec, const std::string &prefix, Eigen::Index in,
                  Eigen::Index hidden);
Var gru_cell(ParamBinding &p, const std::string &prefix, Var x, Var h);

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_NN_H_
