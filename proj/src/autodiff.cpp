//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/autodiff.h"

#include <cmath>

#include <fmt/format.h>

#include "molrl/error.h"

namespace molrl::ad {

const Matrix &Var::value() const {
  if (tape_ == nullptr)
    fail(ErrorKind::kModel, "use of an unbound autodiff variable");
  return tape_->value(id_);
}

void Tape::check_finite(const Matrix &m, const char *what) const {
  if (!m.allFinite())
    fail(ErrorKind::kNumeric,
         fmt::format("non-finite {} in {}", what,
                     scope_.empty() ? std::string("<unscoped>") : scope_));
}

Var Tape::variable(Matrix value) {
  check_finite(value, "value");
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  check_finite(value, "value");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, Backward backward) {
  check_finite(value, "value");
  Node n;
  n.value = std::move(value);
  if (record_)
    for (const Var &v: inputs) {
      if (v.tape() != this)
        fail(ErrorKind::kModel, "autodiff operands live on different tapes");
      if (nodes_[v.id()].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
  if (n.needs_grad)
    n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs,
               Backward backward) {
  return push(std::move(value),
              std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

void Tape::accumulate(int id, const Matrix &g) {
  Node &n = nodes_[id];
  if (!n.needs_grad)
    return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(const Var &out) {
  if (out.tape() != this)
    fail(ErrorKind::kModel, "backward called on a foreign variable");
  if (out.rows() != 1 || out.cols() != 1)
    fail(ErrorKind::kShape, "backward needs a 1x1 output");
  if (!record_)
    fail(ErrorKind::kModel, "backward on a tape that does not record");
  for (auto &n: nodes_)
    n.grad.resize(0, 0);
  accumulate(out.id(), Matrix::Ones(1, 1));
  for (int id = out.id(); id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.backward || n.grad.size() == 0)
      continue;
    check_finite(n.grad, "gradient");
    n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(const Var &v) const {
  const Node &n = nodes_[v.id()];
  if (n.grad.size() == 0)
    return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void require_same_shape(const Var &a, const Var &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorKind::kShape,
         fmt::format("{}: shape {}x{} vs {}x{}", op, a.rows(), a.cols(),
                     b.rows(), b.cols()));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var operator+(const Var &a, const Var &b) {
  require_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), { a, b },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, g);
                          t.accumulate(ib, g);
                        });
}

Var operator-(const Var &a, const Var &b) {
  require_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), { a, b },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, g);
                          t.accumulate(ib, -g);
                        });
}

Var operator*(const Var &a, const Var &b) {
  require_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(
      a.value().cwiseProduct(b.value()), { a, b },
      [=](Tape &t, const Matrix &g) {
        if (t.needs_grad(ia))
          t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.needs_grad(ib))
          t.accumulate(ib, g.cwiseProduct(t.value(ia)));
      });
}

Var operator*(const Var &a, double c) {
  const int ia = a.id();
  return a.tape()->push(a.value() * c, { a },
                        [=](Tape &t, const Matrix &g) { t.accumulate(ia, g * c); });
}

Var operator*(double c, const Var &a) { return a * c; }

Var operator+(const Var &a, double c) {
  const int ia = a.id();
  return a.tape()->push(a.value().array() + c, { a },
                        [=](Tape &t, const Matrix &g) { t.accumulate(ia, g); });
}

Var operator-(const Var &a) { return a * -1.0; }

Var matmul(const Var &a, const Var &b) {
  if (a.cols() != b.rows())
    fail(ErrorKind::kShape,
         fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(),
                     b.cols()));
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(
      a.value() * b.value(), { a, b }, [=](Tape &t, const Matrix &g) {
        if (t.needs_grad(ia))
          t.accumulate(ia, g * t.value(ib).transpose());
        if (t.needs_grad(ib))
          t.accumulate(ib, t.value(ia).transpose() * g);
      });
}

Var add_row(const Var &a, const Var &row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    fail(ErrorKind::kShape,
         fmt::format("add_row: {}x{} plus row {}x{}", a.rows(), a.cols(),
                     row.rows(), row.cols()));
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return a.tape()->push(std::move(v), { a, row },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, g);
                          if (t.needs_grad(ir))
                            t.accumulate(ir, g.colwise().sum());
                        });
}

Var scale_rows(const Var &a, const Var &w) {
  if (w.cols() != 1 || w.rows() != a.rows())
    fail(ErrorKind::kShape,
         fmt::format("scale_rows: {}x{} by {}x{}", a.rows(), a.cols(), w.rows(),
                     w.cols()));
  const int ia = a.id(), iw = w.id();
  Matrix v = a.value().array().colwise() * w.value().col(0).array();
  return a.tape()->push(
      std::move(v), { a, w }, [=](Tape &t, const Matrix &g) {
        if (t.needs_grad(ia)) {
          Matrix ga = g.array().colwise() * t.value(iw).col(0).array();
          t.accumulate(ia, ga);
        }
        if (t.needs_grad(iw))
          t.accumulate(iw, g.cwiseProduct(t.value(ia)).rowwise().sum());
      });
}

Var silu(const Var &a) {
  const int ia = a.id();
  Matrix v = a.value().unaryExpr([](double x) { return x * logistic(x); });
  return a.tape()->push(std::move(v), { a }, [=](Tape &t, const Matrix &g) {
    Matrix d = t.value(ia).unaryExpr([](double x) {
      const double s = logistic(x);
      return s * (1.0 + x * (1.0 - s));
    });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

Var tanh(const Var &a) {
  const int ia = a.id();
  const int out = static_cast<int>(a.tape()->size());
  return a.tape()->push(a.value().array().tanh(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, (g.array()
                                            * (1.0 - t.value(out).array().square()))
                                               .matrix());
                        });
}

Var square(const Var &a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().square(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, 2.0 * g.cwiseProduct(t.value(ia)));
                        });
}

Var sqrt(const Var &a) {
  const int ia = a.id();
  if ((a.value().array() < 0).any())
    fail(ErrorKind::kDomain, "sqrt of a negative value");
  Matrix v = a.value().array().sqrt();
  const int out = static_cast<int>(a.tape()->size());
  return a.tape()->push(std::move(v), { a }, [=](Tape &t, const Matrix &g) {
    t.accumulate(ia, (0.5 * g.array() / t.value(out).array()).matrix());
  });
}

Var reciprocal(const Var &a) {
  const int ia = a.id();
  const int out = static_cast<int>(a.tape()->size());
  return a.tape()->push(a.value().array().inverse(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, (-g.array()
                                            * t.value(out).array().square())
                                               .matrix());
                        });
}

Var exp(const Var &a) {
  const int ia = a.id();
  const int out = static_cast<int>(a.tape()->size());
  return a.tape()->push(a.value().array().exp(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, g.cwiseProduct(t.value(out)));
                        });
}

Var log(const Var &a) {
  const int ia = a.id();
  if ((a.value().array() <= 0).any())
    fail(ErrorKind::kDomain, "log of a non-positive value");
  return a.tape()->push(a.value().array().log(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, (g.array() / t.value(ia).array())
                                               .matrix());
                        });
}

Var clamp(const Var &a, double lo, double hi) {
  const int ia = a.id();
  return a.tape()->push(
      a.value().cwiseMax(lo).cwiseMin(hi), { a },
      [=](Tape &t, const Matrix &g) {
        const Matrix &x = t.value(ia);
        Matrix d = g;
        for (Eigen::Index k = 0; k < d.size(); ++k)
          if (x(k) < lo || x(k) > hi)
            d(k) = 0.0;
        t.accumulate(ia, d);
      });
}

Var minimum(const Var &a, const Var &b) {
  require_same_shape(a, b, "minimum");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(
      a.value().cwiseMin(b.value()), { a, b }, [=](Tape &t, const Matrix &g) {
        const Matrix &x = t.value(ia);
        const Matrix &y = t.value(ib);
        Matrix ga = Matrix::Zero(g.rows(), g.cols());
        Matrix gb = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index k = 0; k < g.size(); ++k)
          (x(k) <= y(k) ? ga(k) : gb(k)) = g(k);
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
      });
}

Var sum(const Var &a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(Matrix::Constant(1, 1, a.value().sum()), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
                        });
}

Var mean(const Var &a) {
  if (a.value().size() == 0)
    fail(ErrorKind::kShape, "mean of an empty matrix");
  return sum(a) * (1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(const Var &a) {
  const int ia = a.id();
  const Eigen::Index c = a.cols();
  return a.tape()->push(a.value().rowwise().sum(), { a },
                        [=](Tape &t, const Matrix &g) {
                          t.accumulate(ia, g.replicate(1, c));
                        });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty())
    fail(ErrorKind::kShape, "hcat of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index total = 0;
  for (const Var &p: parts) {
    if (p.rows() != rows)
      fail(ErrorKind::kShape, "hcat: row counts differ");
    total += p.cols();
  }
  Matrix v(rows, total);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var &p: parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  return parts.front().tape()->push(
      std::move(v), parts, [ids, widths](Tape &t, const Matrix &g) {
        Eigen::Index off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.needs_grad(ids[k]))
            t.accumulate(ids[k], g.middleCols(off, widths[k]));
          off += widths[k];
        }
      });
}

Var cols(const Var &a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    fail(ErrorKind::kShape, "cols: slice out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(a.value().middleCols(start, count), { a },
                        [=](Tape &t, const Matrix &g) {
                          Matrix d = Matrix::Zero(r, c);
                          d.middleCols(start, count) = g;
                          t.accumulate(ia, d);
                        });
}

Var gather_rows(const Var &a, std::span<const int> index) {
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  const Matrix &x = a.value();
  Matrix v(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= r)
      fail(ErrorKind::kShape, "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(k)) = x.row(index[k]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->push(std::move(v), { a },
                        [=, idx = std::move(idx)](Tape &t, const Matrix &g) {
                          Matrix d = Matrix::Zero(r, g.cols());
                          for (std::size_t k = 0; k < idx.size(); ++k)
                            d.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
                          t.accumulate(ia, d);
                        });
}

Var scatter_add_rows(const Var &a, std::span<const int> index,
                     Eigen::Index rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    fail(ErrorKind::kShape, "scatter_add_rows: index size differs from rows");
  const int ia = a.id();
  const Matrix &x = a.value();
  Matrix v = Matrix::Zero(rows, x.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= rows)
      fail(ErrorKind::kShape, "scatter_add_rows: index out of range");
    v.row(index[k]) += x.row(static_cast<Eigen::Index>(k));
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->push(std::move(v), { a },
                        [=, idx = std::move(idx)](Tape &t, const Matrix &g) {
                          Matrix d(static_cast<Eigen::Index>(idx.size()), g.cols());
                          for (std::size_t k = 0; k < idx.size(); ++k)
                            d.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
                          t.accumulate(ia, d);
                        });
}

namespace {

Matrix center(const Matrix &x, const std::vector<int> &offsets) {
  Matrix v = x;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const Eigen::Index b = offsets[s], n = offsets[s + 1] - offsets[s];
    if (n == 0)
      continue;
    Eigen::RowVectorXd m = v.middleRows(b, n).colwise().mean();
    v.middleRows(b, n).rowwise() -= m;
  }
  return v;
}

}  // namespace

Var center_segments(const Var &a, std::span<const int> offsets) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != a.rows())
    fail(ErrorKind::kShape, "center_segments: offsets do not cover the rows");
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
    if (offsets[s + 1] < offsets[s])
      fail(ErrorKind::kShape, "center_segments: offsets must be sorted");
  const int ia = a.id();
  std::vector<int> off(offsets.begin(), offsets.end());
  Matrix v = center(a.value(), off);
  // Centering is a symmetric projection, so the adjoint is centered too.
  return a.tape()->push(std::move(v), { a },
                        [=, off = std::move(off)](Tape &t, const Matrix &g) {
                          t.accumulate(ia, center(g, off));
                        });
}

}  // namespace molrl::ad
