// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "shadowint/align/alignment.hpp"
#include "shadowint/core/types.hpp"
#include "shadowint/model/losses.hpp"

namespace shadowint::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int index = -1;
};

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Every op appends a node holding its value and a closure that pushes the
/// node's gradient into its inputs. backward() walks the nodes in reverse.
/// Nodes built only from constants carry no closure and receive no gradient.
template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;

  Var constant(Matrix value) { return push(std::move(value), false); }
  Var parameter(Matrix value) { return push(std::move(value), true); }

  const Matrix& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.index)).value; }
  const Matrix& grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.index)).grad; }
  Scalar scalar(Var v) const { return value(v)(0, 0); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    check_inner(a, b, "matmul");
    Var out = push(value(a) * value(b), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (requires_grad(a)) acc(a, g * value(b).transpose());
      if (requires_grad(b)) acc(b, value(a).transpose() * g);
    });
    return out;
  }

  /// a * b^T.
  Var matmul_nt(Var a, Var b) {
    if (value(a).cols() != value(b).cols()) throw ValidationError("matmul_nt: inner dimension mismatch");
    Var out = push(value(a) * value(b).transpose(), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (requires_grad(a)) acc(a, g * value(b));
      if (requires_grad(b)) acc(b, g.transpose() * value(a));
    });
    return out;
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Var out = push(value(a) + value(b), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      if (requires_grad(a)) acc(a, node(out).grad);
      if (requires_grad(b)) acc(b, node(out).grad);
    });
    return out;
  }

  /// Adds a 1 x c bias row to every row of x.
  Var add_row(Var x, Var bias) {
    if (value(bias).rows() != 1 || value(bias).cols() != value(x).cols()) {
      throw ValidationError("add_row: bias must be 1 x " + std::to_string(value(x).cols()));
    }
    Matrix v = value(x);
    v.rowwise() += value(bias).row(0);
    Var out = push(std::move(v), any_grad({x, bias}));
    on_backward(out, [this, x, bias, out] {
      if (requires_grad(x)) acc(x, node(out).grad);
      if (requires_grad(bias)) acc(bias, node(out).grad.colwise().sum());
    });
    return out;
  }

  /// x * w + b.
  Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

  Var scale(Var x, Scalar s) {
    Var out = push(value(x) * s, any_grad({x}));
    on_backward(out, [this, x, s, out] { acc(x, node(out).grad * s); });
    return out;
  }

  Var relu(Var x) {
    Var out = push(value(x).cwiseMax(Scalar(0)), any_grad({x}));
    on_backward(out, [this, x, out] {
      acc(x, (value(x).array() > Scalar(0)).select(node(out).grad, Scalar(0)));
    });
    return out;
  }

  Var tanh(Var x) {
    Var out = push(value(x).array().tanh().matrix(), any_grad({x}));
    on_backward(out, [this, x, out] {
      const Matrix& y = value(out);
      acc(x, (node(out).grad.array() * (Scalar(1) - y.array().square())).matrix());
    });
    return out;
  }

  /// Same-padded 1-D convolution over rows. weight is (kernel * c_in) x c_out,
  /// block o of its rows multiplies input row t + o - kernel/2.
  Var conv1d(Var x, Var weight, Var bias, int kernel) {
    const Matrix& xv = value(x);
    const Eigen::Index c_in = xv.cols();
    if (kernel < 1 || kernel % 2 == 0) throw ValidationError("conv1d: kernel width must be odd and positive");
    if (value(weight).rows() != kernel * c_in) {
      throw ValidationError("conv1d: weight has " + std::to_string(value(weight).rows()) + " rows, expected " +
                            std::to_string(kernel * c_in));
    }
    Var cols = push(im2col(xv, kernel), requires_grad(x));
    on_backward(cols, [this, x, cols, kernel] { acc(x, col2im(node(cols).grad, kernel, value(x).cols())); });
    return affine(cols, weight, bias);
  }

  Var softmax_rows(Var x) {
    const Matrix& xv = value(x);
    Matrix p = (xv.colwise() - xv.rowwise().maxCoeff()).array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    Var out = push(std::move(p), any_grad({x}));
    on_backward(out, [this, x, out] {
      const Matrix& p = value(out);
      const Matrix& g = node(out).grad;
      const VectorX<Scalar> dot = (g.array() * p.array()).rowwise().sum();
      acc(x, (p.array() * (g.array().colwise() - dot.array())).matrix());
    });
    return out;
  }

  Var log_softmax_cols(Var x) {
    Var out = push(log_softmax_columns(value(x)), any_grad({x}));
    on_backward(out, [this, x, out] {
      const Matrix p = value(out).array().exp().matrix();
      const Matrix& g = node(out).grad;
      Matrix dx = g;
      dx -= p * g.colwise().sum().asDiagonal();
      acc(x, dx);
    });
    return out;
  }

  /// -||src_i - trg_j||^2 / temperature.
  Var alignment_logits(Var src, Var trg, Scalar temperature) {
    Var out = push(shadowint::alignment_logits(value(src), value(trg), static_cast<double>(temperature)),
                   any_grad({src, trg}));
    on_backward(out, [this, src, trg, temperature, out] {
      const Matrix& g = node(out).grad;
      const Scalar k = Scalar(2) / temperature;
      if (requires_grad(src)) {
        Matrix d = g * value(trg);
        d -= g.rowwise().sum().asDiagonal() * value(src);
        acc(src, d * k);
      }
      if (requires_grad(trg)) {
        Matrix d = g.transpose() * value(src);
        d -= g.colwise().sum().transpose().asDiagonal() * value(trg);
        acc(trg, d * k);
      }
    });
    return out;
  }

  /// Row j of the output is row index[j] of x.
  Var gather_rows(Var x, std::vector<int> index) {
    const Matrix& xv = value(x);
    Matrix v(static_cast<Eigen::Index>(index.size()), xv.cols());
    for (std::size_t j = 0; j < index.size(); ++j) {
      if (index[j] < 0 || index[j] >= xv.rows()) throw ValidationError("gather_rows: index out of range");
      v.row(static_cast<Eigen::Index>(j)) = xv.row(index[j]);
    }
    Var out = push(std::move(v), any_grad({x}));
    on_backward(out, [this, x, index = std::move(index), out] {
      Matrix d = Matrix::Zero(value(x).rows(), value(x).cols());
      const Matrix& g = node(out).grad;
      for (std::size_t j = 0; j < index.size(); ++j) d.row(index[j]) += g.row(static_cast<Eigen::Index>(j));
      acc(x, d);
    });
    return out;
  }

  Var inverse_length_regulate(Var z, std::vector<int> durations) {
    Var out = push(shadowint::inverse_length_regulate(value(z), durations), any_grad({z}));
    on_backward(out, [this, z, durations = std::move(durations), out] {
      Matrix d(value(z).rows(), value(z).cols());
      const Matrix& g = node(out).grad;
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < durations.size(); ++i) {
        for (int k = 0; k < durations[i]; ++k) d.row(row++) = g.row(static_cast<Eigen::Index>(i)) / Scalar(durations[i]);
      }
      acc(z, d);
    });
    return out;
  }

  Var concat_cols(Var a, Var b) {
    if (value(a).rows() != value(b).rows()) throw ValidationError("concat_cols: row count mismatch");
    Matrix v(value(a).rows(), value(a).cols() + value(b).cols());
    v << value(a), value(b);
    Var out = push(std::move(v), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (requires_grad(a)) acc(a, g.leftCols(value(a).cols()));
      if (requires_grad(b)) acc(b, g.rightCols(value(b).cols()));
    });
    return out;
  }

  // Scalar-valued losses, stored as 1 x 1.

  /// Forward-sum loss of column-normalized log probabilities.
  Var forward_sum(Var log_probs) {
    auto result = shadowint::forward_sum(value(log_probs), true);
    Var out = push(Matrix::Constant(1, 1, std::max(result.loss, Scalar(0))), any_grad({log_probs}));
    on_backward(out, [this, log_probs, occ = std::move(result.occupancy), out] {
      acc(log_probs, occ * -node(out).grad(0, 0));
    });
    return out;
  }

  /// -sum_j log_probs(assign[j], j).
  Var path_nll(Var log_probs, const HardAlignment& hard) {
    const Matrix& lp = value(log_probs);
    if (static_cast<Eigen::Index>(hard.assign.size()) != lp.cols()) {
      throw ValidationError("path_nll: path length does not match the number of target frames");
    }
    Scalar total(0);
    for (std::size_t j = 0; j < hard.assign.size(); ++j) total -= lp(hard.assign[j], static_cast<Eigen::Index>(j));
    Var out = push(Matrix::Constant(1, 1, total), any_grad({log_probs}));
    on_backward(out, [this, log_probs, assign = hard.assign, out] {
      Matrix d = Matrix::Zero(value(log_probs).rows(), value(log_probs).cols());
      for (std::size_t j = 0; j < assign.size(); ++j) d(assign[j], static_cast<Eigen::Index>(j)) = -node(out).grad(0, 0);
      acc(log_probs, d);
    });
    return out;
  }

  Var mean_abs_error(Var pred, const Matrix& target) {
    const Matrix& p = value(pred);
    if (p.rows() != target.rows() || p.cols() != target.cols()) throw ValidationError("mean_abs_error: shape mismatch");
    const Scalar n = Scalar(std::max<Eigen::Index>(p.size(), 1));
    Var out = push(Matrix::Constant(1, 1, (p - target).cwiseAbs().sum() / n), any_grad({pred}));
    on_backward(out, [this, pred, target, n, out] {
      const Matrix diff = value(pred) - target;
      acc(pred, diff.unaryExpr([](Scalar d) { return Scalar((d > Scalar(0)) - (d < Scalar(0))); }) *
                    (node(out).grad(0, 0) / n));
    });
    return out;
  }

  Var focal(Var logits, const Marks& labels, double gamma, double alpha) {
    auto r = focal_loss_with_gradient(value(logits).reshaped(), labels, gamma, alpha);
    Var out = push(Matrix::Constant(1, 1, r.value), any_grad({logits}));
    on_backward(out, [this, logits, g = std::move(r.gradient), out] {
      acc(logits, (g * node(out).grad(0, 0)).reshaped(value(logits).rows(), value(logits).cols()));
    });
    return out;
  }

  Var duration(Var predicted_log_durations, const std::vector<int>& durations) {
    auto r = duration_loss_with_gradient(value(predicted_log_durations).reshaped(), durations);
    Var out = push(Matrix::Constant(1, 1, r.value), any_grad({predicted_log_durations}));
    on_backward(out, [this, v = predicted_log_durations, g = std::move(r.gradient), out] {
      acc(v, (g * node(out).grad(0, 0)).reshaped(value(v).rows(), value(v).cols()));
    });
    return out;
  }

  /// Runs the reverse sweep from a 1 x 1 node, seeding its gradient with 1.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw ValidationError("backward: loss must be a scalar");
    for (auto& n : nodes_) {
      if (n.requires_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    }
    node(loss).grad.setOnes(1, 1);
    for (auto i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.backprop) n.backprop();
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void()> backprop;
  };

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.index)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.index)); }

  Var push(Matrix value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, {}});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F>
  void on_backward(Var out, F&& f) {
    if (node(out).requires_grad) node(out).backprop = std::forward<F>(f);
  }

  bool any_grad(std::initializer_list<Var> vars) const {
    for (Var v : vars) {
      if (requires_grad(v)) return true;
    }
    return false;
  }

  template <typename Expr>
  void acc(Var v, const Expr& g) {
    Node& n = node(v);
    if (n.requires_grad) n.grad += g;
  }

  void check_inner(Var a, Var b, const char* op) const {
    if (value(a).cols() != value(b).rows()) {
      throw ValidationError(std::string(op) + ": " + std::to_string(value(a).rows()) + "x" +
                            std::to_string(value(a).cols()) + " times " + std::to_string(value(b).rows()) + "x" +
                            std::to_string(value(b).cols()));
    }
  }

  void check_same(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw ValidationError(std::string(op) + ": shape mismatch");
    }
  }

  static Matrix im2col(const Matrix& x, int kernel) {
    const Eigen::Index t = x.rows(), c = x.cols(), half = kernel / 2;
    Matrix cols = Matrix::Zero(t, kernel * c);
    for (int o = 0; o < kernel; ++o) {
      const Eigen::Index shift = o - half;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index hi = std::min<Eigen::Index>(t, t - shift);
      if (hi > lo) cols.block(lo, o * c, hi - lo, c) = x.middleRows(lo + shift, hi - lo);
    }
    return cols;
  }

  static Matrix col2im(const Matrix& g, int kernel, Eigen::Index c) {
    const Eigen::Index t = g.rows(), half = kernel / 2;
    Matrix x = Matrix::Zero(t, c);
    for (int o = 0; o < kernel; ++o) {
      const Eigen::Index shift = o - half;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index hi = std::min<Eigen::Index>(t, t - shift);
      if (hi > lo) x.middleRows(lo + shift, hi - lo) += g.block(lo, o * c, hi - lo, c);
    }
    return x;
  }

  std::vector<Node> nodes_;
};

}  // namespace shadowint::nn
