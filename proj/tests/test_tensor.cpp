#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "warpada/gradcheck.hpp"
#include "warpada/random.hpp"
#include "warpada/tensor.hpp"

using namespace warpada;

namespace {

Tensor random_vec(std::size_t n, Rng& rng) {
  Tensor t = Tensor::zeros({n});
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor distinct_vec(std::size_t n, Rng& rng) {
  Tensor t = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = false;
    while (!ok) {
      t[i] = rng.uniform(-1.0, 1.0);
      ok = std::fabs(t[i]) > 1e-3;
      for (std::size_t j = 0; j < i; ++j) ok = ok && std::fabs(t[i] - t[j]) > 1e-3;
    }
  }
  return t;
}

}  // namespace

TEST(Tensor, ShapeAndSizeMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), Error);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_EQ(shape_string(t.shape()), "[2, 3]");
}

TEST(Tensor, ReshapedKeepsData) {
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({4, 2}), Error);
}

TEST(Tape, BackwardOfSumIsOnes) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0.5, -2.0, 3.0}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(x), Tensor::vector({1.0, 1.0, 1.0}));
}

TEST(Tape, ProductRuleByHand) {
  Tape tape;
  Var a = tape.leaf(Tensor(3.0));
  Var b = tape.leaf(Tensor(-2.0));
  Var y = a * b + a;  // dy/da = b + 1, dy/db = a
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(a).item(), -1.0);
  EXPECT_DOUBLE_EQ(tape.grad(b).item(), 3.0);
}

TEST(Tape, SharedSubexpressionAccumulates) {
  Tape tape;
  Var x = tape.leaf(Tensor(2.0));
  Var y = x * x * x;
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x).item(), 12.0);
}

TEST(Tape, BackwardNeedsScalarRoot) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(x * 2.0), Error);
}

TEST(Tape, UnreachedLeafHasZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var unused = tape.leaf(Tensor::vector({5.0, 6.0, 7.0}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(unused), Tensor::zeros({3}));
}

TEST(Tape, RepeatedBackwardIsBitwiseIdentical) {
  Rng rng(3);
  const Tensor x0 = random_vec(9, rng);
  auto run = [&] {
    Tape tape;
    Var x = tape.leaf(x0);
    tape.backward(sum(exp(sin(x) * x) / (x * x + 1.0)));
    return tape.grad(x);
  };
  EXPECT_EQ(run(), run());

  Tape tape;
  Var x = tape.leaf(x0);
  Var y = mean(cos(x) * x);
  tape.backward(y);
  const Tensor first = tape.grad(x);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x), first);
}

TEST(Tape, CheckedModeRejectsBadInputs) {
  Tape tape;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(tape.leaf(Tensor::vector({1.0, nan})), Error);
  Var x = tape.leaf(Tensor::vector({1.0, 0.0}));
  EXPECT_THROW(log(x), Error);
  EXPECT_THROW(div(tape.constant(Tensor(1.0)), tape.constant(Tensor(0.0))), Error);
}

TEST(Tape, UncheckedModeLetsNonFinitePropagate) {
  Tape tape(false);
  Var x = tape.leaf(Tensor::vector({1.0, 0.0}));
  EXPECT_FALSE(log(x).value().all_finite());
}

TEST(Tape, ShapeMismatchIsAnError) {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({1, 2, 3}));
  Var b = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(matmul(tape.leaf(Tensor::zeros({2, 3})), tape.leaf(Tensor::zeros({2, 3}))), Error);
}

TEST(Tape, ScalarBroadcasts) {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({1, 2, 3}));
  Var s = tape.leaf(Tensor(2.0));
  Var y = sum(a * s);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(y.item(), 12.0);
  EXPECT_DOUBLE_EQ(tape.grad(s).item(), 6.0);
  EXPECT_EQ(tape.grad(a), Tensor::vector({2, 2, 2}));
}

TEST(Ops, CumsumThenDifferenceRecoversInput) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_vec(50, rng);
    Tape tape;
    const Tensor c = cumsum(tape.constant(x)).value();
    EXPECT_NEAR(c[0], x[0], 1e-12);
    for (std::size_t i = 1; i < x.size(); ++i) EXPECT_NEAR(c[i] - c[i - 1], x[i], 1e-12);
  }
}

TEST(Ops, CumsumRejectsEmptyAndMatrices) {
  Tape tape;
  EXPECT_THROW(cumsum(tape.leaf(Tensor::zeros({0}))), Error);
  EXPECT_THROW(cumsum(tape.leaf(Tensor::zeros({2, 2}))), Error);
}

TEST(Ops, MinMaxGradientGoesToFirstAttainingIndex) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({3.0, -1.0, 4.0, -1.0, 4.0}));
  tape.backward(min_reduce(x) + max_reduce(x));
  EXPECT_EQ(tape.grad(x), Tensor::vector({0, 1, 1, 0, 0}));
}

TEST(Ops, MatmulValues) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = tape.constant(Tensor({2, 1}, {5, 6}));
  EXPECT_EQ(matmul(a, b).value(), Tensor({2, 1}, {17, 39}));
}

TEST(Ops, Conv1dMatchesDirectSum) {
  Rng rng(2);
  Tensor x = Tensor::zeros({2, 9});
  Tensor k = Tensor::zeros({3, 2, 3});
  for (double& v : x.data()) v = rng.uniform(-1, 1);
  for (double& v : k.data()) v = rng.uniform(-1, 1);
  Tape tape;
  const Tensor y = conv1d(tape.constant(x), tape.constant(k), 2, 1).value();
  ASSERT_EQ(y.shape(), (Shape{3, 5}));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t t = 0; t < 5; ++t) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t j = 0; j < 3; ++j) {
          const long src = static_cast<long>(t * 2 + j) - 1;
          if (src >= 0 && src < 9) acc += k[(o * 2 + c) * 3 + j] * x[c * 9 + static_cast<std::size_t>(src)];
        }
      }
      EXPECT_NEAR(y.at(o, t), acc, 1e-14);
    }
  }
}

TEST(GradCheck, SquareAtThree) {
  ScalarGraph f = [](Tape&, Var x) { return sum(x * x); };
  EXPECT_NEAR(analytic_gradient(f, Tensor::vector({3.0}))[0], 6.0, 1e-12);
  EXPECT_LT(finite_diff_check(f, Tensor::vector({3.0})), 1e-9);
}

TEST(GradCheck, SumHasZeroError) {
  Rng rng(4);
  EXPECT_LT(finite_diff_check([](Tape&, Var x) { return sum(x); }, random_vec(10, rng)), 1e-9);
}

TEST(GradCheck, DetectsAWrongBackwardRule) {
  Rng rng(5);
  const Tensor x = random_vec(6, rng);
  ScalarGraph f = [](Tape&, Var v) { return sum(cos(v * 2.0)); };
  EXPECT_LT(finite_diff_check(f, x), 1e-6);
  testing_hooks::flip_cos_backward() = true;
  const double err = finite_diff_check(f, x);
  testing_hooks::flip_cos_backward() = false;
  EXPECT_GT(err, 1.0);
}

// Every op at random points with entries in [-1, 1], away from kinks.
TEST(GradCheck, EveryOpAtRandomPoints) {
  Rng rng(17);
  const Tensor w = random_vec(7, rng);
  struct Case {
    const char* name;
    bool distinct;
    ScalarGraph f;
    double tol;
  };
  const std::vector<Case> cases = {
      {"add", false, [&](Tape& t, Var x) { return sum(add(x * x, x) * t.constant(w)); }, 1e-5},
      {"sub", false, [&](Tape& t, Var x) { return sum(sub(sin(x), x * x) * t.constant(w)); }, 1e-5},
      {"mul", false, [&](Tape& t, Var x) { return sum(mul(x, exp(x)) * t.constant(w)); }, 1e-5},
      {"div", false, [&](Tape& t, Var x) { return sum(div(x, x * x + 2.0) * t.constant(w)); }, 1e-5},
      {"neg", false, [&](Tape& t, Var x) { return sum(-(x * x) * t.constant(w)); }, 1e-5},
      {"relu", true, [&](Tape& t, Var x) { return sum(relu(x) * t.constant(w)); }, 1e-5},
      {"abs", true, [&](Tape& t, Var x) { return sum(abs(x) * t.constant(w)); }, 1e-5},
      {"cos", false, [&](Tape& t, Var x) { return sum(cos(x * 2.0) * t.constant(w)); }, 1e-5},
      {"sin", false, [&](Tape& t, Var x) { return sum(sin(x * 2.0) * t.constant(w)); }, 1e-5},
      {"exp", false, [&](Tape& t, Var x) { return sum(exp(x) * t.constant(w)); }, 1e-5},
      {"log", false, [&](Tape& t, Var x) { return sum(log(x * x + 0.3) * t.constant(w)); }, 1e-5},
      {"mean", false, [&](Tape&, Var x) { return mean(x * x * x + x * 2.0); }, 1e-5},
      {"min_reduce", true, [&](Tape&, Var x) { return min_reduce(x * x * x); }, 1e-8},
      {"max_reduce", true, [&](Tape&, Var x) { return max_reduce(sin(x)); }, 1e-8},
      {"cumsum", false, [&](Tape& t, Var x) { return sum(cumsum(x * x) * t.constant(w)); }, 1e-8},
  };
  for (const auto& c : cases) {
    for (int p = 0; p < 10; ++p) {
      const Tensor x = c.distinct ? distinct_vec(7, rng) : random_vec(7, rng);
      EXPECT_LT(finite_diff_check(c.f, x), c.tol) << c.name;
    }
  }
}

TEST(GradCheck, MatmulBothSides) {
  Rng rng(8);
  Tensor a = Tensor::zeros({4, 5}), b = Tensor::zeros({5, 3});
  for (double& v : a.data()) v = rng.uniform(-1, 1);
  for (double& v : b.data()) v = rng.uniform(-1, 1);
  EXPECT_LT(finite_diff_check([&](Tape& t, Var x) { return sum(sin(matmul(x, t.constant(b)))); }, a), 1e-6);
  EXPECT_LT(finite_diff_check([&](Tape& t, Var x) { return sum(sin(matmul(t.constant(a), x))); }, b), 1e-6);
}

TEST(GradCheck, Conv1dInputAndKernels) {
  Rng rng(9);
  Tensor x = Tensor::zeros({2, 16}), k = Tensor::zeros({3, 2, 3});
  for (double& v : x.data()) v = rng.uniform(-1, 1);
  for (double& v : k.data()) v = rng.uniform(-1, 1);
  EXPECT_LT(finite_diff_check([&](Tape& t, Var v) { return sum(sin(conv1d(v, t.constant(k), 2, 1))); }, x), 1e-5);
  EXPECT_LT(finite_diff_check([&](Tape& t, Var v) { return sum(sin(conv1d(t.constant(x), v, 2, 1))); }, k), 1e-5);
}

TEST(Random, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a();
    EXPECT_EQ(va, b());
    (void)c;
  }
  EXPECT_NE(Rng(42)(), Rng(43)());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Random, BelowStaysInRange) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
  }
}
