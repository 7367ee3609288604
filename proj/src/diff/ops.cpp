//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "hamforge/error.h"

namespace hamforge::diff {
namespace {
  [[noreturn]] void shape_error(const char *op, const Matrix &a, const Matrix &b) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{}: {}x{} vs {}x{}", op, a.rows(), a.cols(), b.rows(), b.cols()));
  }

  Eigen::Index broadcast_dim(const char *op, const Matrix &a, const Matrix &b,
                             Eigen::Index x, Eigen::Index y) {
    if (x == y)
      return x;
    if (x == 1)
      return y;
    if (y == 1)
      return x;
    shape_error(op, a, b);
  }

  Matrix expand(const Matrix &m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols)
      return m;
    return m.replicate(rows / m.rows(), cols / m.cols());
  }

  // Sums a broadcast gradient back to the operand's shape.
  Matrix reduce_to(const Matrix &g, Eigen::Index rows, Eigen::Index cols) {
    if (g.rows() == rows && g.cols() == cols)
      return g;
    Matrix out = g;
    if (rows == 1 && out.rows() != 1)
      out = Matrix(out.colwise().sum());
    if (cols == 1 && out.cols() != 1)
      out = Matrix(out.rowwise().sum());
    return out;
  }

  Tape &tape_of(Var a) {
    if (!a.valid())
      throw Error(ErrorCode::kShapeMismatch, "operation on an empty Var");
    return *a.tape();
  }

  template <class Fwd, class Dfdx>
  Var unary(Var a, Fwd fwd, Dfdx dfdx) {
    Tape &t = tape_of(a);
    Matrix y = fwd(a.value());
    Matrix local = t.requires_grad(a) ? dfdx(a.value(), y) : Matrix();
    return t.record(std::move(y), { a }, [a, local = std::move(local)](Tape &tp, const Matrix &g) {
      tp.accumulate(a, g.cwiseProduct(local));
    });
  }

  std::size_t check_axis(int axis) {
    if (axis != 0 && axis != 1)
      throw Error(ErrorCode::kShapeMismatch, fmt::format("axis {} out of range", axis));
    return static_cast<std::size_t>(axis);
  }
}  // namespace

Var add(Var a, Var b) {
  Tape &t = tape_of(a);
  const Matrix &av = a.value(), &bv = b.value();
  const Eigen::Index r = broadcast_dim("add", av, bv, av.rows(), bv.rows());
  const Eigen::Index c = broadcast_dim("add", av, bv, av.cols(), bv.cols());
  Matrix y = expand(av, r, c) + expand(bv, r, c);
  return t.record(std::move(y), { a, b },
                  [a, b, ar = av.rows(), ac = av.cols(), br = bv.rows(),
                   bc = bv.cols()](Tape &tp, const Matrix &g) {
                    tp.accumulate(a, reduce_to(g, ar, ac));
                    tp.accumulate(b, reduce_to(g, br, bc));
                  });
}

Var sub(Var a, Var b) {
  Tape &t = tape_of(a);
  const Matrix &av = a.value(), &bv = b.value();
  const Eigen::Index r = broadcast_dim("sub", av, bv, av.rows(), bv.rows());
  const Eigen::Index c = broadcast_dim("sub", av, bv, av.cols(), bv.cols());
  Matrix y = expand(av, r, c) - expand(bv, r, c);
  return t.record(std::move(y), { a, b },
                  [a, b, ar = av.rows(), ac = av.cols(), br = bv.rows(),
                   bc = bv.cols()](Tape &tp, const Matrix &g) {
                    tp.accumulate(a, reduce_to(g, ar, ac));
                    tp.accumulate(b, reduce_to(-g, br, bc));
                  });
}

Var mul(Var a, Var b) {
  Tape &t = tape_of(a);
  const Matrix &av = a.value(), &bv = b.value();
  const Eigen::Index r = broadcast_dim("mul", av, bv, av.rows(), bv.rows());
  const Eigen::Index c = broadcast_dim("mul", av, bv, av.cols(), bv.cols());
  Matrix ae = expand(av, r, c), be = expand(bv, r, c);
  Matrix y = ae.cwiseProduct(be);
  return t.record(std::move(y), { a, b },
                  [a, b, ae = std::move(ae), be = std::move(be)](Tape &tp, const Matrix &g) {
                    if (tp.requires_grad(a))
                      tp.accumulate(a, reduce_to(g.cwiseProduct(be), a.rows(), a.cols()));
                    if (tp.requires_grad(b))
                      tp.accumulate(b, reduce_to(g.cwiseProduct(ae), b.rows(), b.cols()));
                  });
}

Var div(Var a, Var b) {
  Tape &t = tape_of(a);
  const Matrix &av = a.value(), &bv = b.value();
  const Eigen::Index r = broadcast_dim("div", av, bv, av.rows(), bv.rows());
  const Eigen::Index c = broadcast_dim("div", av, bv, av.cols(), bv.cols());
  Matrix ae = expand(av, r, c), be = expand(bv, r, c);
  Matrix y = ae.cwiseQuotient(be);
  return t.record(y, { a, b },
                  [a, b, be = std::move(be), y](Tape &tp, const Matrix &g) {
                    if (tp.requires_grad(a))
                      tp.accumulate(a, reduce_to(g.cwiseQuotient(be), a.rows(), a.cols()));
                    if (tp.requires_grad(b))
                      tp.accumulate(b, reduce_to(-g.cwiseProduct(y).cwiseQuotient(be),
                                                 b.rows(), b.cols()));
                  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  Tape &t = tape_of(a);
  return t.record(a.value() * factor, { a },
                  [a, factor](Tape &tp, const Matrix &g) { tp.accumulate(a, g * factor); });
}

Var add_scalar(Var a, double c) {
  Tape &t = tape_of(a);
  return t.record(Matrix(a.value().array() + c), { a },
                  [a](Tape &tp, const Matrix &g) { tp.accumulate(a, g); });
}

Var matmul(Var a, Var b) {
  Tape &t = tape_of(a);
  const Matrix &av = a.value(), &bv = b.value();
  if (av.cols() != bv.rows())
    shape_error("matmul", av, bv);
  Matrix y = av * bv;
  return t.record(std::move(y), { a, b }, [a, b](Tape &tp, const Matrix &g) {
    if (tp.requires_grad(a))
      tp.accumulate(a, g * b.value().transpose());
    if (tp.requires_grad(b))
      tp.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Tape &t = tape_of(a);
  return t.record(Matrix(a.value().transpose()), { a },
                  [a](Tape &tp, const Matrix &g) { tp.accumulate(a, g.transpose()); });
}

Var concat(std::span<const Var> parts, int axis) {
  check_axis(axis);
  if (parts.empty())
    throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  Tape &t = tape_of(parts[0]);
  Eigen::Index rows = 0, cols = 0;
  for (const Var &p: parts) {
    const Matrix &v = p.value();
    if (axis == 1) {
      if (v.rows() != parts[0].rows())
        shape_error("concat", parts[0].value(), v);
      rows = v.rows();
      cols += v.cols();
    } else {
      if (v.cols() != parts[0].cols())
        shape_error("concat", parts[0].value(), v);
      cols = v.cols();
      rows += v.rows();
    }
  }
  Matrix y(rows, cols);
  Eigen::Index offset = 0;
  for (const Var &p: parts) {
    const Matrix &v = p.value();
    if (axis == 1) {
      y.middleCols(offset, v.cols()) = v;
      offset += v.cols();
    } else {
      y.middleRows(offset, v.rows()) = v;
      offset += v.rows();
    }
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return t.record(std::move(y), parents, [parents, axis](Tape &tp, const Matrix &g) {
    Eigen::Index off = 0;
    for (const Var &p: parents) {
      if (axis == 1) {
        if (tp.requires_grad(p))
          tp.accumulate(p, g.middleCols(off, p.cols()));
        off += p.cols();
      } else {
        if (tp.requires_grad(p))
          tp.accumulate(p, g.middleRows(off, p.rows()));
        off += p.rows();
      }
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape &t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows())
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("slice_rows [{}, {}) of {} rows", start, start + count, a.rows()));
  return t.record(Matrix(a.value().middleRows(start, count)), { a },
                  [a, start, count](Tape &tp, const Matrix &g) {
                    Matrix full = Matrix::Zero(a.rows(), a.cols());
                    full.middleRows(start, count) = g;
                    tp.accumulate(a, full);
                  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape &t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols())
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("slice_cols [{}, {}) of {} cols", start, start + count, a.cols()));
  return t.record(Matrix(a.value().middleCols(start, count)), { a },
                  [a, start, count](Tape &tp, const Matrix &g) {
                    Matrix full = Matrix::Zero(a.rows(), a.cols());
                    full.middleCols(start, count) = g;
                    tp.accumulate(a, full);
                  });
}

Var sum(Var a) {
  Tape &t = tape_of(a);
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return t.record(std::move(y), { a }, [a](Tape &tp, const Matrix &g) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var sum(Var a, int axis) {
  check_axis(axis);
  Tape &t = tape_of(a);
  Matrix y = axis == 0 ? Matrix(a.value().colwise().sum()) : Matrix(a.value().rowwise().sum());
  return t.record(std::move(y), { a }, [a](Tape &tp, const Matrix &g) {
    tp.accumulate(a, expand(g, a.rows(), a.cols()));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var mean(Var a, int axis) {
  check_axis(axis);
  const auto n = static_cast<double>(axis == 0 ? a.rows() : a.cols());
  return scale(sum(a, axis), n > 0 ? 1.0 / n : 0.0);
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](const Matrix &x) {
        return Matrix(x.unaryExpr([](double v) {
          // split by sign so exp never overflows
          if (v >= 0)
            return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        }));
      },
      [](const Matrix &, const Matrix &y) { return Matrix(y.array() * (1.0 - y.array())); });
}

Var tanh(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.array().tanh()); },
      [](const Matrix &, const Matrix &y) { return Matrix(1.0 - y.array().square()); });
}

Var relu(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.cwiseMax(0.0)); },
      [](const Matrix &x, const Matrix &) {
        return Matrix((x.array() > 0.0).cast<double>());
      });
}

Var abs(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.cwiseAbs()); },
      [](const Matrix &x, const Matrix &) {
        return Matrix(x.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }));
      });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a,
      [slope](const Matrix &x) {
        return Matrix(x.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; }));
      },
      [slope](const Matrix &x, const Matrix &) {
        return Matrix(x.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; }));
      });
}

Var exp(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.array().exp()); },
      [](const Matrix &, const Matrix &y) { return y; });
}

Var log(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.array().log()); },
      [](const Matrix &x, const Matrix &) { return Matrix(x.array().inverse()); });
}

// The gradient at exactly zero is taken as zero (subgradient choice), so a
// loss that is exactly satisfied does not produce NaN gradients.
Var sqrt(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.array().sqrt()); },
      [](const Matrix &, const Matrix &y) {
        return Matrix(y.unaryExpr([](double v) { return v > 0 ? 0.5 / v : 0.0; }));
      });
}

Var square(Var a) {
  return unary(
      a, [](const Matrix &x) { return Matrix(x.array().square()); },
      [](const Matrix &x, const Matrix &) { return Matrix(2.0 * x.array()); });
}

Var pow(Var a, double exponent) {
  return unary(
      a, [exponent](const Matrix &x) { return Matrix(x.array().pow(exponent)); },
      [exponent](const Matrix &x, const Matrix &) {
        return Matrix(exponent * x.array().pow(exponent - 1.0));
      });
}

Var softmax(Var a, int axis) {
  check_axis(axis);
  Tape &t = tape_of(a);
  Matrix y = a.value();
  if (axis == 1) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      y.row(r).array() -= y.row(r).maxCoeff();
      y.row(r) = y.row(r).array().exp();
      y.row(r) /= y.row(r).sum();
    }
  } else {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      y.col(c).array() -= y.col(c).maxCoeff();
      y.col(c) = y.col(c).array().exp();
      y.col(c) /= y.col(c).sum();
    }
  }
  return t.record(y, { a }, [a, y, axis](Tape &tp, const Matrix &g) {
    Matrix gy = g.cwiseProduct(y);
    Matrix dx;
    if (axis == 1)
      dx = gy - Matrix(y.array().colwise() * gy.rowwise().sum().array());
    else
      dx = gy - Matrix(y.array().rowwise() * gy.colwise().sum().array());
    tp.accumulate(a, dx);
  });
}

Var clamp_min(Var a, double floor) {
  return unary(
      a, [floor](const Matrix &x) { return Matrix(x.cwiseMax(floor)); },
      [floor](const Matrix &x, const Matrix &) {
        return Matrix((x.array() > floor).cast<double>());
      });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape &t = tape_of(a);
  Matrix y(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= static_cast<std::size_t>(a.rows()))
      throw Error(ErrorCode::kShapeMismatch, "gather_rows index out of range");
    y.row(static_cast<Eigen::Index>(k)) = a.value().row(static_cast<Eigen::Index>(index[k]));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return t.record(std::move(y), { a }, [a, idx = std::move(idx)](Tape &tp, const Matrix &g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx.size(); ++k)
      full.row(static_cast<Eigen::Index>(idx[k])) += g.row(static_cast<Eigen::Index>(k));
    tp.accumulate(a, full);
  });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, Eigen::Index rows) {
  Tape &t = tape_of(a);
  if (index.size() != static_cast<std::size_t>(a.rows()))
    throw Error(ErrorCode::kShapeMismatch, "scatter_add_rows index length differs from rows");
  Matrix y = Matrix::Zero(rows, a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= static_cast<std::size_t>(rows))
      throw Error(ErrorCode::kShapeMismatch, "scatter_add_rows index out of range");
    y.row(static_cast<Eigen::Index>(index[k])) += a.value().row(static_cast<Eigen::Index>(k));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return t.record(std::move(y), { a }, [a, idx = std::move(idx)](Tape &tp, const Matrix &g) {
    Matrix part(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx.size(); ++k)
      part.row(static_cast<Eigen::Index>(k)) = g.row(static_cast<Eigen::Index>(idx[k]));
    tp.accumulate(a, part);
  });
}

Var segment_softmax(Var scores, std::span<const std::size_t> segment,
                    std::size_t num_segments) {
  Tape &t = tape_of(scores);
  if (scores.cols() != 1 || segment.size() != static_cast<std::size_t>(scores.rows()))
    throw Error(ErrorCode::kShapeMismatch, "segment_softmax expects an E x 1 column");
  const Matrix &x = scores.value();
  std::vector<double> peak(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < segment.size(); ++k) {
    if (segment[k] >= num_segments)
      throw Error(ErrorCode::kShapeMismatch, "segment id out of range");
    peak[segment[k]] = std::max(peak[segment[k]], x(static_cast<Eigen::Index>(k), 0));
  }
  Matrix y(x.rows(), 1);
  std::vector<double> total(num_segments, 0.0);
  for (std::size_t k = 0; k < segment.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    y(r, 0) = std::exp(x(r, 0) - peak[segment[k]]);
    total[segment[k]] += y(r, 0);
  }
  for (std::size_t k = 0; k < segment.size(); ++k)
    y(static_cast<Eigen::Index>(k), 0) /= total[segment[k]];

  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return t.record(y, { scores },
                  [scores, y, seg = std::move(seg), num_segments](Tape &tp, const Matrix &g) {
                    std::vector<double> dot(num_segments, 0.0);
                    for (std::size_t k = 0; k < seg.size(); ++k) {
                      const auto r = static_cast<Eigen::Index>(k);
                      dot[seg[k]] += g(r, 0) * y(r, 0);
                    }
                    Matrix dx(y.rows(), 1);
                    for (std::size_t k = 0; k < seg.size(); ++k) {
                      const auto r = static_cast<Eigen::Index>(k);
                      dx(r, 0) = y(r, 0) * (g(r, 0) - dot[seg[k]]);
                    }
                    tp.accumulate(scores, dx);
                  });
}

}  // namespace hamforge::diff
