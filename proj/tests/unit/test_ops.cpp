#include <gtest/gtest.h>

#include <cmath>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/ops.hpp"
#include "gradcheck.hpp"

using namespace fednlp;
using fednlp::testing::gradcheck;
using fednlp::testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

// Weighted sum with fixed random weights, so every output coordinate matters.
Var probe(Tape& tape, Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, tape.constant(random_tensor(y.shape(), rng))));
}

}  // namespace

TEST(OpsGrad, Matmul) {
  Rng rng(1);
  auto r = gradcheck({random_tensor({4, 5}, rng), random_tensor({5, 3}, rng)},
                     [](Tape& t, const std::vector<Var>& x) { return probe(t, matmul(x[0], x[1])); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, MatmulRank3Left) {
  Rng rng(2);
  auto r = gradcheck({random_tensor({2, 3, 4}, rng), random_tensor({4, 2}, rng)},
                     [](Tape& t, const std::vector<Var>& x) { return probe(t, matmul(x[0], x[1])); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, AddSubMulWithBroadcast) {
  Rng rng(3);
  auto r = gradcheck({random_tensor({3, 4}, rng), random_tensor({4}, rng), random_tensor({3, 4}, rng)},
                     [](Tape& t, const std::vector<Var>& x) {
                       return probe(t, mul(sub(add(x[0], x[1]), x[2]), add(x[2], x[1])));
                     });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, Activations) {
  Rng rng(4);
  for (auto kind : {Elementwise::tanh, Elementwise::sigmoid, Elementwise::gelu}) {
    auto r = gradcheck({random_tensor({5, 6}, rng, -3.0, 3.0)},
                       [kind](Tape& t, const std::vector<Var>& x) { return probe(t, elementwise(kind, x[0])); });
    EXPECT_LT(r.max_rel_error, kTol) << static_cast<int>(kind) << " " << r.worst;
  }
}

TEST(OpsGrad, ScaleAndSoftmax) {
  Rng rng(5);
  auto r = gradcheck({random_tensor({4, 7}, rng, -2.0, 2.0)},
                     [](Tape& t, const std::vector<Var>& x) { return probe(t, softmax_rows(scale(x[0], 1.7))); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, LayerNorm) {
  Rng rng(6);
  auto r = gradcheck({random_tensor({3, 8}, rng, -2.0, 2.0), random_tensor({8}, rng, 0.5, 1.5), random_tensor({8}, rng)},
                     [](Tape& t, const std::vector<Var>& x) { return probe(t, layer_norm(x[0], x[1], x[2])); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, EmbeddingLookupWithRepeatedIds) {
  Rng rng(7);
  std::vector<std::int32_t> ids = {0, 3, 3, 1, 4, 0};
  auto r = gradcheck({random_tensor({5, 3}, rng)}, [&](Tape& t, const std::vector<Var>& x) {
    return probe(t, embedding_lookup(x[0], ids, Shape{2, 3}));
  });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, MaskedCrossEntropy) {
  Rng rng(8);
  std::vector<std::int32_t> labels = {2, -1, 0, 4, -1};
  auto r = gradcheck({random_tensor({5, 6}, rng, -2.0, 2.0)}, [&](Tape&, const std::vector<Var>& x) {
    return masked_cross_entropy(x[0], labels, -1);
  });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGrad, ShapeOps) {
  Rng rng(9);
  std::vector<std::size_t> rows = {3, 0, 3, 2};
  auto r = gradcheck({random_tensor({4, 6}, rng), random_tensor({2, 6}, rng)}, [&](Tape& t, const std::vector<Var>& x) {
    Var a = slice_cols(slice_rows(x[0], 1, 4), 2, 5);
    Var b = gather_rows(x[0], rows);
    std::vector<Var> parts = {x[1], slice_rows(x[0], 0, 2)};
    Var c = reshape(concat_rows(parts), Shape{6, 4});
    return add(add(probe(t, a, 1), probe(t, b, 2)), probe(t, c, 3));
  });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Ops, CrossEntropyKnownValue) {
  Tape tape;
  Var logits = tape.leaf(Tensor::matrix(2, 3, {0.0, 0.0, 0.0, 1.0, 2.0, 3.0}));
  std::vector<std::int32_t> labels = {1, 2};
  Var loss = masked_cross_entropy(logits, labels, -1);
  double l2 = -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  EXPECT_NEAR(loss.value()[0], (std::log(3.0) + l2) / 2.0, 1e-12);
}

TEST(Ops, CrossEntropyAllIgnoredIsZeroWithZeroGradient) {
  Tape tape;
  Var logits = tape.leaf(Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  std::vector<std::int32_t> labels = {-1, -1};
  Var loss = masked_cross_entropy(logits, labels, -1);
  EXPECT_EQ(loss.value()[0], 0.0);
  tape.backward(loss);
  for (double g : logits.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(Ops, IgnoredRowsGetNoGradient) {
  Tape tape;
  Var logits = tape.leaf(Tensor::matrix(3, 2, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));
  std::vector<std::int32_t> labels = {0, -1, 1};
  tape.backward(masked_cross_entropy(logits, labels, -1));
  EXPECT_EQ(logits.grad().at(1, 0), 0.0);
  EXPECT_EQ(logits.grad().at(1, 1), 0.0);
  EXPECT_NE(logits.grad().at(0, 0), 0.0);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(10);
  Tape tape;
  Var y = softmax_rows(tape.leaf(random_tensor({6, 9}, rng, -50.0, 50.0)));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (double v : y.value().row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, GeluMatchesErfForm) {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{3}, std::vector<double>{-1.0, 0.0, 2.0}));
  Var y = gelu(x);
  for (std::size_t i = 0; i < 3; ++i) {
    double v = x.value()[i];
    EXPECT_NEAR(y.value()[i], 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-15);
  }
}

TEST(Ops, LayerNormNormalizesRows) {
  Rng rng(11);
  Tape tape;
  Var y = layer_norm(tape.leaf(random_tensor({4, 16}, rng, -5.0, 5.0)), tape.constant(Tensor(Shape{16}, 1.0)),
                     tape.constant(Tensor(Shape{16}, 0.0)));
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0.0, v = 0.0;
    for (double x : y.value().row(r)) m += x;
    m /= 16;
    for (double x : y.value().row(r)) v += (x - m) * (x - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16, 1.0, 1e-3);
  }
}

TEST(Ops, ErrorsAreTyped) {
  Tape tape;
  Var a = tape.leaf(Tensor(Shape{2, 3}));
  Var b = tape.leaf(Tensor(Shape{4, 2}));
  EXPECT_THROW(matmul(a, b), DimensionError);
  EXPECT_THROW(add(a, b), DimensionError);
  std::vector<std::int32_t> bad = {0, 7};
  EXPECT_THROW(embedding_lookup(a, bad, Shape{2}), IndexError);
  std::vector<std::int32_t> labels = {0, 3};
  EXPECT_THROW(masked_cross_entropy(a, labels, -1), IndexError);
  EXPECT_THROW(slice_rows(a, 1, 3), IndexError);
  EXPECT_THROW(tape.backward(a), UsageError);
}

TEST(Autodiff, GradientsAccumulateOverSharedNodes) {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{1}, 3.0));
  Var y = mul(x, x);       // x^2
  Var z = add(y, mul(y, x));  // x^2 + x^3
  tape.backward(sum(z));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 3.0 + 3 * 9.0);
}

TEST(Autodiff, ConstantsGetNoGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{2}, 1.0));
  Var c = tape.constant(Tensor(Shape{2}, 2.0));
  tape.backward(sum(mul(x, c)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}
