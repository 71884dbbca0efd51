//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "molrl/autodiff.h"
#include "molrl/error.h"
#include "molrl/random.h"

namespace molrl::ad {
namespace {

using Build = std::function<Var(Tape &, std::vector<Var> &)>;

// Compares tape gradients against central differences of the scalar output.
void check_gradients(std::vector<Matrix> inputs, const Build &build,
                     double tol = 1e-6) {
  auto evaluate = [&](const std::vector<Matrix> &xs) {
    Tape tape(false);
    std::vector<Var> vars;
    for (const auto &x: xs)
      vars.push_back(tape.constant(x));
    return build(tape, vars).scalar();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto &x: inputs)
    vars.push_back(tape.variable(x));
  Var out = build(tape, vars);
  tape.backward(out);

  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix analytic = tape.grad(vars[k]);
    for (Eigen::Index e = 0; e < inputs[k].size(); ++e) {
      auto plus = inputs, minus = inputs;
      plus[k](e) += h;
      minus[k](e) -= h;
      double numeric = (evaluate(plus) - evaluate(minus)) / (2 * h);
      EXPECT_NEAR(analytic(e), numeric, tol * (1 + std::abs(numeric)))
          << "input " << k << " element " << e;
    }
  }
}

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(rng, r, c);
}

TEST(Autodiff, ElementwiseChain) {
  check_gradients({ random_matrix(3, 4, 1), random_matrix(3, 4, 2) },
                  [](Tape &, std::vector<Var> &v) {
                    Var a = silu(v[0]) * v[1] + square(v[0]) * 0.5;
                    return sum(exp(a * 0.3) - v[1]);
                  });
}

TEST(Autodiff, MatmulBiasAndRows) {
  check_gradients(
      { random_matrix(5, 3, 3), random_matrix(3, 2, 4), random_matrix(1, 2, 5),
        random_matrix(5, 1, 6) },
      [](Tape &, std::vector<Var> &v) {
        Var y = add_row(matmul(v[0], v[1]), v[2]);
        return mean(scale_rows(silu(y), v[3]));
      });
}

TEST(Autodiff, GatherScatterCenter) {
  std::vector<int> src { 0, 1, 2, 3, 1 };
  std::vector<int> dst { 1, 0, 3, 2, 2 };
  std::vector<int> offsets { 0, 2, 4 };
  check_gradients({ random_matrix(4, 3, 7) }, [&](Tape &, std::vector<Var> &v) {
    Var diff = gather_rows(v[0], src) - gather_rows(v[0], dst);
    Var d2 = row_sum(square(diff));
    Var w = reciprocal(sqrt(d2 + 1e-3) + 1.0);
    Var agg = scatter_add_rows(scale_rows(diff, w), dst, 4);
    Var c = center_segments(agg + v[0], offsets);
    return sum(square(c) * 0.7);
  });
}

TEST(Autodiff, HcatColsLogClampMinimum) {
  Matrix a = random_matrix(2, 3, 8).array().abs() + 0.5;
  Matrix b = random_matrix(2, 2, 9);
  check_gradients({ a, b }, [](Tape &, std::vector<Var> &v) {
    Var parts[] = { v[0], v[1] };
    Var h = hcat(parts);
    Var l = log(cols(h, 0, 3));
    Var r = exp(cols(h, 3, 2) * 0.2);
    Var clipped = clamp(r, 0.9, 1.1);
    Var rr = cols(l, 0, 2);
    return sum(minimum(clipped * rr, r * rr));
  });
}

TEST(Autodiff, NonFiniteValueNamesScope) {
  Tape tape;
  tape.set_scope("layer 2");
  Var x = tape.variable(Matrix::Constant(1, 1, 1000.0));
  try {
    exp(x);
    FAIL() << "expected a numeric error";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos);
  }
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.variable(Matrix::Zero(2, 3));
  Var b = tape.variable(Matrix::Zero(3, 2));
  EXPECT_THROW(a + b, Error);
  EXPECT_NO_THROW(matmul(a, b));
}

TEST(Autodiff, ForwardOnlyTapeKeepsNoGradients) {
  Tape tape(false);
  Var a = tape.variable(Matrix::Ones(2, 2));
  Var s = sum(a * a);
  EXPECT_DOUBLE_EQ(s.scalar(), 4.0);
  EXPECT_FALSE(tape.needs_grad(s.id()));
  EXPECT_THROW(tape.backward(s), Error);
}

}  // namespace
}  // namespace molrl::ad
