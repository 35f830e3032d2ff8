#pragma once

// Fully-connected ReLU classifiers: representation, exact inference and the
// two-class decision rule used throughout the verifier.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nnv/errors.hpp"

namespace nnv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Two-class decision. Index 0 is safe and index 1 is unsafe everywhere
/// (logits, datasets, reports, MILP objectives).
enum class ClassLabel : int { Safe = 0, Unsafe = 1 };

inline constexpr int kSafeIndex = 0;
inline constexpr int kUnsafeIndex = 1;

inline const char* to_string(ClassLabel c) { return c == ClassLabel::Safe ? "safe" : "unsafe"; }

/// One affine map y = W x + b. Rows of W are output neurons.
struct DenseLayer {
  Matrix weights;
  Vector bias;

  int inputs() const { return static_cast<int>(weights.cols()); }
  int outputs() const { return static_cast<int>(weights.rows()); }
};

/// ReLU MLP with K >= 1 hidden layers and an affine two-logit output layer.
///
/// Every layer except the last is followed by max(., 0). Instances are
/// immutable after construction as far as the verifier is concerned and can
/// be shared read-only between threads.
class Network {
 public:
  Network() = default;

  /// Validates shape chaining, the two-logit output and finiteness.
  Network(int input_dim, std::vector<DenseLayer> layers) : input_dim_(input_dim), layers_(std::move(layers)) {
    validate();
  }

  int input_dim() const { return input_dim_; }
  int num_hidden() const { return static_cast<int>(layers_.size()) - 1; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t k) const { return layers_.at(k); }

  /// Mutable access for the trainer; callers must keep shapes intact.
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  /// Layer widths [input, hidden..., 2].
  std::vector<int> architecture() const {
    std::vector<int> arch{input_dim_};
    for (const auto& l : layers_) arch.push_back(l.outputs());
    return arch;
  }

  std::size_t num_weights() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size());
    return n;
  }

  /// Fraction of weight entries (biases excluded) that are exactly zero.
  double weight_sparsity() const {
    std::size_t zeros = 0;
    for (const auto& l : layers_) zeros += static_cast<std::size_t>((l.weights.array() == 0.0).count());
    const auto n = num_weights();
    return n == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(n);
  }

  void validate() const {
    if (input_dim_ <= 0) throw ShapeError("network input_dim must be positive");
    if (layers_.size() < 2) throw ShapeError("network needs at least one hidden layer");
    int prev = input_dim_;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.inputs() != prev)
        throw ShapeError("layer " + std::to_string(k) + " expects " + std::to_string(l.inputs()) +
                         " inputs but previous layer provides " + std::to_string(prev));
      if (l.bias.size() != l.weights.rows())
        throw ShapeError("layer " + std::to_string(k) + " bias length does not match weight rows");
      if (l.outputs() <= 0) throw ShapeError("layer " + std::to_string(k) + " has no neurons");
      if (!l.weights.allFinite() || !l.bias.allFinite())
        throw ShapeError("layer " + std::to_string(k) + " has non-finite parameters");
      prev = l.outputs();
    }
    if (prev != 2) throw ShapeError("output layer must have exactly 2 neurons (safe, unsafe)");
  }

 private:
  int input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Per hidden layer pre-activations (z_hat) and post-ReLU values (z).
struct Activations {
  std::vector<Vector> pre;
  std::vector<Vector> post;
};

struct ForwardResult {
  Vector logits;
  Activations activations;
};

namespace detail {
inline void check_input(const Network& net, Eigen::Index n) {
  if (n != net.input_dim())
    throw ShapeError("input has " + std::to_string(n) + " entries, network expects " +
                     std::to_string(net.input_dim()));
}
}  // namespace detail

inline ForwardResult forward(const Network& net, const Vector& x) {
  detail::check_input(net, x.size());
  if (!x.allFinite()) throw ShapeError("input contains non-finite values");
  ForwardResult r;
  Vector a = x;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    Vector pre = layers[k].weights * a + layers[k].bias;
    a = pre.cwiseMax(0.0);
    r.activations.pre.push_back(std::move(pre));
    r.activations.post.push_back(a);
  }
  r.logits = layers.back().weights * a + layers.back().bias;
  return r;
}

inline ForwardResult forward(const Network& net, std::span<const double> x) {
  return forward(net, Vector(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()))));
}

/// Logits only; avoids storing the activations.
inline Vector logits(const Network& net, const Vector& x) {
  detail::check_input(net, x.size());
  Vector a = x;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) a = (layers[k].weights * a + layers[k].bias).cwiseMax(0.0);
  return layers.back().weights * a + layers.back().bias;
}

/// Safe iff y_safe > y_unsafe strictly; ties go to Unsafe.
inline ClassLabel classify_logits(const Vector& y) {
  return y(kSafeIndex) > y(kUnsafeIndex) ? ClassLabel::Safe : ClassLabel::Unsafe;
}

inline ClassLabel classify(const Network& net, const Vector& x) { return classify_logits(logits(net, x)); }

/// Max-subtracted softmax.
inline Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

/// -sum_i ybar_i log p_i. Zero-probability entries with zero target weight are
/// skipped so that p = [1, 0] with target [1, 0] gives exactly 0.
inline double cross_entropy(const Vector& target_onehot, const Vector& probabilities) {
  if (target_onehot.size() != probabilities.size()) throw ShapeError("cross_entropy: size mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < target_onehot.size(); ++i)
    if (target_onehot(i) != 0.0) loss -= target_onehot(i) * std::log(probabilities(i));
  return loss;
}

/// One-hot target vector for a label.
inline Vector onehot(ClassLabel c) {
  Vector v = Vector::Zero(2);
  v(static_cast<int>(c)) = 1.0;
  return v;
}

}  // namespace nnv
