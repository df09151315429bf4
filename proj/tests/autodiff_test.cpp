#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rfidlab/autodiff/loss.hpp"
#include "rfidlab/autodiff/ops.hpp"
#include "support/finite_diff.hpp"
#include "support/probes.hpp"

namespace ad = rfidlab::ad;
using rfidlab::Error;
using rfidlab::ErrorKind;
using TF = ad::Tensor<float>;
using TD = ad::Tensor<double>;

TEST(Forward, SoftmaxOfEqualLogitsIsUniform) {
  auto y = ad::softmax(TF({1, 2}, {0.f, 0.f}));
  EXPECT_FLOAT_EQ(y.data()[0], 0.5f);
  EXPECT_FLOAT_EQ(y.data()[1], 0.5f);
}

TEST(Forward, Relu) {
  auto y = ad::relu(TF({2}, {-1.f, 2.f}));
  EXPECT_EQ(y.values(), (std::vector<float>{0.f, 2.f}));
}

TEST(Forward, ConvOfOnesIsNine) {
  // Hand convolution: each 3x3 window of ones sums to 9.
  auto x = TF::full({1, 1, 5, 5}, 1.f);
  auto w = TF::full({1, 1, 3, 3}, 1.f);
  auto y = ad::conv2d(x, w, TF::zeros({1}));
  ASSERT_EQ(y.shape(), (ad::Shape{1, 1, 3, 3}));
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 9.f);
}

TEST(Forward, TransposedConvIsAdjointOfConv) {
  // <conv(x), y> == <x, conv_T(y)> for matching geometry.
  std::mt19937_64 rng(7);
  auto x = rfidlab::testing::random_tensor({1, 2, 6, 6}, rng);
  auto y = rfidlab::testing::random_tensor({1, 3, 3, 3}, rng);
  auto w = rfidlab::testing::random_tensor({3, 2, 4, 4}, rng);
  auto cx = ad::conv2d(x, w, TD::zeros({3}), 2, 1);
  auto ty = ad::conv_transpose2d(y, w, TD::zeros({2}), 2, 1);
  ASSERT_EQ(ty.shape(), x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * ty.data()[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Forward, ShapeMismatchNamesPrimitive) {
  try {
    ad::add(TF::zeros({2}), TF::zeros({3}));
    FAIL() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(2)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(3)"), std::string::npos);
  }
  EXPECT_THROW(ad::matmul(TF::zeros({2, 3}), TF::zeros({2, 3})), Error);
  EXPECT_THROW(ad::conv2d(TF::zeros({1, 2, 4, 4}), TF::zeros({1, 3, 3, 3}), TF::zeros({1})), Error);
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(TF({2, 2}, {1.f, 2.f, 3.f}), Error);
  TF nan({1}, {std::nanf("")});
  EXPECT_FALSE(nan.all_finite());
  EXPECT_THROW(nan.check_finite("x"), Error);
}

TEST(Backward, Square) {
  TF x({}, {3.f}, true);
  ad::backward(ad::mul(x, x));
  EXPECT_FLOAT_EQ(x.grad()[0], 6.f);
}

TEST(Backward, NormGradientIsUnitVector) {
  TF x({2}, {3.f, 4.f}, true);
  ad::backward(ad::l2_norm(x));
  EXPECT_FLOAT_EQ(x.grad()[0], 0.6f);
  EXPECT_FLOAT_EQ(x.grad()[1], 0.8f);
}

TEST(Backward, NonScalarLossRejected) {
  TF x({2}, {1.f, 2.f}, true);
  EXPECT_THROW(ad::backward(ad::relu(x)), Error);
  ad::Tape<float>::current().clear();
}

TEST(Backward, EmptyTapeRejected) {
  TF x({}, {1.f});
  EXPECT_THROW(ad::backward(ad::mul(x, x)), Error);
}

TEST(Backward, ClearsTapeAndVisitsOnce) {
  TF x({}, {2.f}, true);
  auto loss = ad::mul(ad::add(x, x), x);  // 2x^2 -> 4x
  EXPECT_EQ(ad::Tape<float>::current().size(), 2u);
  ad::backward(loss);
  EXPECT_TRUE(ad::Tape<float>::current().empty());
  EXPECT_FLOAT_EQ(x.grad()[0], 8.f);
  EXPECT_THROW(ad::backward(loss), Error);
}

TEST(Backward, NoGradGuardSkipsRecording) {
  TF x({2}, {1.f, 2.f}, true);
  {
    ad::NoGradGuard guard;
    auto y = ad::sum(ad::mul(x, x));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ad::Tape<float>::current().empty());
}

TEST(Backward, LinearityOverSummedLosses) {
  std::mt19937_64 rng(3);
  auto base = rfidlab::testing::random_tensor({3, 4}, rng);
  auto w = rfidlab::testing::random_tensor({5, 4}, rng);
  auto b = rfidlab::testing::random_tensor({5}, rng);
  auto loss_a = [&](const TD& x) { return ad::sum(ad::softplus(ad::linear(x, w, b))); };
  auto loss_b = [&](const TD& x) { return ad::l2_norm(ad::mul(x, x)); };

  TD x1 = base.detach(true), x2 = base.detach(true), x3 = base.detach(true);
  ad::backward(ad::add(loss_a(x1), loss_b(x1)));
  ad::backward(loss_a(x2));
  ad::backward(loss_b(x3));
  for (std::size_t i = 0; i < base.numel(); ++i)
    EXPECT_NEAR(x1.grad()[i], x2.grad()[i] + x3.grad()[i], 1e-12);
}

TEST(Backward, SeededComputationIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(11);
    auto x = rfidlab::testing::random_tensor({2, 3, 8, 8}, rng).cast<float>(true);
    auto w = rfidlab::testing::random_tensor({4, 3, 3, 3}, rng).cast<float>(true);
    auto y = ad::avg_pool2d(ad::relu(ad::conv2d(x, w, TF::zeros({4}), 1, 1)), 2);
    auto loss = ad::mean(ad::mul(y, y));
    ad::backward(loss);
    std::vector<float> out(y.data().begin(), y.data().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(CrossEntropy, TwoEqualLogits) {
  const std::vector<int> label{0};
  EXPECT_NEAR(ad::cross_entropy(TD({1, 2}, {0, 0}), label).item(), std::log(2.0), 1e-12);
}

TEST(CrossEntropy, SaturatedLogitsStayFinite) {
  const std::vector<int> label{0};
  float v = ad::cross_entropy(TF({1, 2}, {1000.f, 0.f}), label).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 0.f, 1e-6f);
}

TEST(CrossEntropy, MatchesNaiveFormula) {
  std::mt19937_64 rng(5);
  auto logits = rfidlab::testing::random_tensor({4, 10}, rng, -3, 3);
  const std::vector<int> labels{1, 7, 0, 9};
  double naive = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0;
    for (std::size_t j = 0; j < 10; ++j) z += std::exp(logits.data()[r * 10 + j]);
    naive += -std::log(std::exp(logits.data()[r * 10 + labels[r]]) / z);
  }
  EXPECT_NEAR(ad::cross_entropy(logits, labels).item(), naive / 4, 1e-6);
  EXPECT_NEAR(ad::cross_entropy(logits, labels, ad::Reduction::sum).item(), naive, 1e-6);
}

TEST(CrossEntropy, LabelOutOfRange) {
  const std::vector<int> labels{10};
  EXPECT_THROW(ad::cross_entropy(TF::zeros({1, 10}), labels), Error);
  const std::vector<int> negative{-1};
  EXPECT_THROW(ad::cross_entropy(TF::zeros({1, 10}), negative), Error);
}

TEST(CrossEntropy, TwoLayerNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  auto x = rfidlab::testing::random_tensor({5, 6}, rng);
  auto w1 = rfidlab::testing::random_tensor({8, 6}, rng);
  auto b1 = rfidlab::testing::random_tensor({8}, rng);
  auto w2 = rfidlab::testing::random_tensor({4, 8}, rng);
  auto b2 = rfidlab::testing::random_tensor({4}, rng);
  const std::vector<int> labels{0, 3, 2, 1, 3};
  // Gradient w.r.t. the first-layer weights.
  auto f = [&](const TD& weight) {
    auto h = ad::softplus(ad::linear(x, weight, b1));
    return ad::cross_entropy(ad::linear(h, w2, b2), labels);
  };
  std::vector<double> at(w1.data().begin(), w1.data().end());
  EXPECT_LT(rfidlab::testing::gradient_check<double>(f, w1.shape(), at, 1e-3), 1e-4);
}

TEST(GradientProbes, EveryPrimitiveMatchesFiniteDifferences) {
  for (const auto& probe : rfidlab::testing::primitive_probes()) {
    double worst = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial)
      worst = std::max(worst, rfidlab::testing::probe_error(probe, 1000 + trial));
    EXPECT_LT(worst, 1e-3) << probe.name;
  }
}
