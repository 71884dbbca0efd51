//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_AUTODIFF_H_
#define MOLRL_AUTODIFF_H_

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace molrl::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
  Var() = default;

  const Matrix &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const { return value()(0, 0); }

  Tape *tape() const { return tape_; }
  int id() const { return id_; }

private:
  friend class Tape;
  Var(Tape *tape, int id): tape_(tape), id_(id) { }

  Tape *tape_ = nullptr;
  int id_ = -1;
};

/// Matrix-valued reverse-mode tape. Operations append nodes holding their
/// value and, when gradients are needed, a closure that pushes the node's
/// adjoint onto its inputs. A tape built with record = false only evaluates.
///
/// Every node value is checked for finiteness on creation; a failure throws
/// kNumeric naming the scope active at the time (see set_scope).
class Tape {
public:
  explicit Tape(bool record = true): record_(record) { }

  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const { return record_; }

  // Leaf that accumulates a gradient (when recording).
  Var variable(Matrix value);
  Var constant(Matrix value);

  // Seeds d(out)/d(out) = 1 for a 1x1 node and runs all closures backwards.
  void backward(const Var &out);

  // Adjoint of v; a zero matrix when nothing reached it.
  Matrix grad(const Var &v) const;

  void set_scope(std::string scope) { scope_ = std::move(scope); }
  const std::string &scope() const { return scope_; }

  std::size_t size() const { return nodes_.size(); }

  // Building blocks for operations.
  const Matrix &value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  const Matrix &adjoint(int id) const { return nodes_[id].grad; }
  void accumulate(int id, const Matrix &g);

  // Receives the tape and the adjoint of the node being processed.
  using Backward = std::function<void(Tape &, const Matrix &)>;
  // `inputs` decide whether the node needs a gradient; `backward` is only
  // retained when it does.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var push(Matrix value, std::span<const Var> inputs, Backward backward);

private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };

  void check_finite(const Matrix &m, const char *what) const;

  bool record_;
  std::string scope_;
  std::deque<Node> nodes_;
};

// -- elementwise and linear algebra ------------------------------------------

Var operator+(const Var &a, const Var &b);
Var operator-(const Var &a, const Var &b);
// Elementwise product.
Var operator*(const Var &a, const Var &b);
Var operator*(const Var &a, double c);
Var operator*(double c, const Var &a);
Var operator+(const Var &a, double c);
Var operator-(const Var &a);

Var matmul(const Var &a, const Var &b);
// a (n x m) + 1 * row (1 x m).
Var add_row(const Var &a, const Var &row);
// Scales row i of a (n x m) by w(i) for w (n x 1).
Var scale_rows(const Var &a, const Var &w);

Var silu(const Var &a);
Var tanh(const Var &a);
Var square(const Var &a);
Var sqrt(const Var &a);
Var reciprocal(const Var &a);
Var exp(const Var &a);
Var log(const Var &a);
// Gradient passes only where lo <= a <= hi.
Var clamp(const Var &a, double lo, double hi);
// Elementwise min; ties route the gradient to `a`.
Var minimum(const Var &a, const Var &b);

// -- reductions and reshaping ------------------------------------------------

Var sum(const Var &a);           // 1 x 1
Var mean(const Var &a);          // 1 x 1
Var row_sum(const Var &a);       // n x 1
Var hcat(std::span<const Var> parts);
Var cols(const Var &a, Eigen::Index start, Eigen::Index count);

// out.row(k) = a.row(index[k]).
Var gather_rows(const Var &a, std::span<const int> index);
// out.row(index[k]) += a.row(k), out has `rows` rows.
Var scatter_add_rows(const Var &a, std::span<const int> index,
                     Eigen::Index rows);
// Subtracts the per-segment row mean; segments are [offsets[g],
// offsets[g+1]).
Var center_segments(const Var &a, std::span<const int> offsets);

}  // namespace molrl::ad

#endif  // MOLRL_AUTODIFF_H_
