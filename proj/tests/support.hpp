#pragma once

#include <random>
#include <vector>

#include "nnv/mlp.hpp"

namespace testing_support {

// 1 input, 1 ReLU: y = [relu(x - 0.5), 0.25]
inline nnv::Network hand_net() {
  std::vector<nnv::DenseLayer> layers;
  layers.push_back({nnv::Matrix::Constant(1, 1, 1.0), nnv::Vector::Constant(1, -0.5)});
  nnv::Matrix w2(2, 1);
  w2 << 1.0, 0.0;
  nnv::Vector b2(2);
  b2 << 0.0, 0.25;
  layers.push_back({w2, b2});
  return nnv::Network(1, std::move(layers));
}

inline nnv::Network random_net(const std::vector<int>& arch, unsigned long seed, double bias_scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<nnv::DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < arch.size(); ++k) {
    nnv::DenseLayer l{nnv::Matrix(arch[k + 1], arch[k]), nnv::Vector(arch[k + 1])};
    const double s = 1.0 / std::sqrt(static_cast<double>(arch[k]));
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = g(rng) * s;
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = g(rng) * bias_scale;
    layers.push_back(std::move(l));
  }
  return nnv::Network(arch.front(), std::move(layers));
}

inline nnv::Vector random_point(std::mt19937_64& rng, int n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nnv::Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

}  // namespace testing_support

namespace testing_support {

// Random net shifted so the decision boundary passes through the box center.
inline nnv::Network balanced_net(const std::vector<int>& arch, unsigned long seed) {
  auto net = random_net(arch, seed);
  const auto y = nnv::logits(net, nnv::Vector::Constant(arch.front(), 0.5));
  net.mutable_layers().back().bias(0) -= y(0) - y(1);
  return net;
}

}  // namespace testing_support
