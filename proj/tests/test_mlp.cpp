#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nnv/mlp.hpp"
#include "nnv/network_io.hpp"
#include "support.hpp"

namespace {

using nnv::ClassLabel;
using nnv::Vector;

Vector vec(std::initializer_list<double> v) {
  Vector r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) r(i++) = d;
  return r;
}

// Scalar loops with no Eigen products, written independently of forward().
std::vector<double> straight_line_logits(const nnv::Network& net, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    std::vector<double> next(static_cast<std::size_t>(l.outputs()));
    for (int i = 0; i < l.outputs(); ++i) {
      double s = l.bias(i);
      for (int j = 0; j < l.inputs(); ++j) s += l.weights(i, j) * a[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = (k + 1 < layers.size() && s < 0.0) ? 0.0 : s;
    }
    a = std::move(next);
  }
  return a;
}

TEST(Forward, HandNetActive) {
  const auto r = nnv::forward(testing_support::hand_net(), vec({1.0}));
  EXPECT_DOUBLE_EQ(r.logits(0), 0.5);
  EXPECT_DOUBLE_EQ(r.logits(1), 0.25);
  EXPECT_DOUBLE_EQ(r.activations.pre[0](0), 0.5);
  EXPECT_DOUBLE_EQ(r.activations.post[0](0), 0.5);
}

TEST(Forward, HandNetClamped) {
  const auto r = nnv::forward(testing_support::hand_net(), vec({0.0}));
  EXPECT_DOUBLE_EQ(r.logits(0), 0.0);
  EXPECT_DOUBLE_EQ(r.logits(1), 0.25);
  EXPECT_DOUBLE_EQ(r.activations.post[0](0), 0.0);
}

TEST(Forward, MatchesIndependentEvaluator) {
  const auto net = testing_support::random_net({3, 50, 50, 50, 2}, 42);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector x = t == 0 ? Vector::Zero(3) : testing_support::random_point(rng, 3);
    const auto ref = straight_line_logits(net, std::vector<double>(x.data(), x.data() + 3));
    const auto y = nnv::logits(net, x);
    EXPECT_NEAR(y(0), ref[0], 1e-12);
    EXPECT_NEAR(y(1), ref[1], 1e-12);
  }
}

TEST(Forward, RejectsWrongDimension) {
  EXPECT_THROW(nnv::forward(testing_support::hand_net(), vec({1.0, 2.0})), nnv::ShapeError);
  EXPECT_THROW(nnv::forward(testing_support::hand_net(), vec({NAN})), nnv::ShapeError);
}

TEST(Forward, AffineWithinActivationRegion) {
  const auto net = testing_support::random_net({4, 20, 20, 2}, 5);
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int t = 0; t < 200 && checked < 20; ++t) {
    const Vector x1 = testing_support::random_point(rng, 4);
    const Vector x2 = x1 + 1e-4 * testing_support::random_point(rng, 4, -1, 1);
    const auto f1 = nnv::forward(net, x1), f2 = nnv::forward(net, x2);
    bool same = true;
    for (std::size_t k = 0; k < f1.activations.pre.size(); ++k)
      same = same && ((f1.activations.pre[k].array() > 0) == (f2.activations.pre[k].array() > 0)).all();
    if (!same) continue;
    ++checked;
    for (double a : {0.25, 0.5, 0.9}) {
      const Vector ym = nnv::logits(net, a * x1 + (1 - a) * x2);
      EXPECT_LE((ym - (a * f1.logits + (1 - a) * f2.logits)).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
  EXPECT_EQ(checked, 20);
}

TEST(Classify, StrictMarginOrUnsafe) {
  EXPECT_EQ(nnv::classify_logits(vec({0.5, 0.25})), ClassLabel::Safe);
  EXPECT_EQ(nnv::classify_logits(vec({0.3, 0.3})), ClassLabel::Unsafe);
  EXPECT_EQ(nnv::classify_logits(vec({-1, 0})), ClassLabel::Unsafe);
}

TEST(Classify, InvariantToCommonOutputShift) {
  auto net = testing_support::random_net({3, 10, 2}, 9);
  auto shifted = net;
  shifted.mutable_layers().back().bias.array() += 3.5;
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const Vector x = testing_support::random_point(rng, 3);
    EXPECT_EQ(nnv::classify(net, x), nnv::classify(shifted, x));
  }
}

TEST(Softmax, Values) {
  const auto p = nnv::softmax(vec({0, 0}));
  EXPECT_DOUBLE_EQ(p(0), 0.5);
  const auto q = nnv::softmax(vec({1000, 1000}));
  EXPECT_DOUBLE_EQ(q(0), 0.5);
  EXPECT_DOUBLE_EQ(q(1), 0.5);
  const auto r = nnv::softmax(vec({std::log(3.0), 0}));
  EXPECT_NEAR(r(0), 0.75, 1e-15);
  EXPECT_NEAR(r(1), 0.25, 1e-15);
  EXPECT_NEAR(nnv::softmax(vec({-3, 7})).sum(), 1.0, 1e-12);
}

TEST(CrossEntropy, Values) {
  EXPECT_DOUBLE_EQ(nnv::cross_entropy(vec({1, 0}), vec({1, 0})), 0.0);
  EXPECT_NEAR(nnv::cross_entropy(vec({1, 0}), vec({0.5, 0.5})), 0.6931471805599453, 1e-15);
  EXPECT_NEAR(nnv::cross_entropy(vec({0, 1}), vec({0.75, 0.25})), 1.3862943611198906, 1e-15);
}

TEST(NetworkShape, RejectsBrokenArchitectures) {
  using nnv::DenseLayer;
  using nnv::Matrix;
  EXPECT_THROW(nnv::Network(2, {DenseLayer{Matrix::Zero(2, 2), Vector::Zero(2)}}), nnv::ShapeError);
  EXPECT_THROW(nnv::Network(2, {DenseLayer{Matrix::Zero(3, 2), Vector::Zero(3)},
                                DenseLayer{Matrix::Zero(2, 4), Vector::Zero(2)}}),
               nnv::ShapeError);
  EXPECT_THROW(nnv::Network(2, {DenseLayer{Matrix::Zero(3, 2), Vector::Zero(3)},
                                DenseLayer{Matrix::Zero(3, 3), Vector::Zero(3)}}),
               nnv::ShapeError);
  Matrix bad = Matrix::Zero(3, 2);
  bad(0, 0) = INFINITY;
  EXPECT_THROW(nnv::Network(2, {DenseLayer{bad, Vector::Zero(3)}, DenseLayer{Matrix::Zero(2, 3), Vector::Zero(2)}}),
               nnv::ShapeError);
}

TEST(NetworkIo, JsonRoundTripIsExact) {
  const auto net = testing_support::random_net({4, 7, 5, 2}, 3);
  const auto back = nnv::network_from_json(nlohmann::json::parse(nnv::network_to_json(net).dump()));
  ASSERT_EQ(back.architecture(), net.architecture());
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    EXPECT_EQ(back.layer(k).weights, net.layer(k).weights);
    EXPECT_EQ(back.layer(k).bias, net.layer(k).bias);
  }
}

TEST(NetworkIo, LoaderValidatesChaining) {
  auto j = nnv::network_to_json(testing_support::random_net({2, 3, 2}, 1));
  j["layers"][1]["weights"][0].push_back(1.0);
  EXPECT_THROW(nnv::network_from_json(j), nnv::ShapeError);
  EXPECT_THROW(nnv::network_from_json(nlohmann::json{{"layers", 1}}), nnv::DataError);
}

}  // namespace
