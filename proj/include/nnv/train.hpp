#pragma once

// Minibatch Adam on mean softmax cross-entropy, gradual magnitude pruning and
// retraining with adversarial examples.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "nnv/dataset.hpp"
#include "nnv/errors.hpp"
#include "nnv/mlp.hpp"

namespace nnv {

struct TrainConfig {
  int epochs = 500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 1;
  double sparsity_target = 0.0;
  int prune_start = 100;
  int prune_end = 400;
  int prune_step = 10;
  int probe_size = 256;
  /// Called after every epoch with the probe-batch loss.
  std::function<void(int epoch, double loss)> on_epoch;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0,1)");
    if (!(eps_adam > 0.0)) throw ConfigError("eps_adam must be positive");
    if (!(sparsity_target >= 0.0 && sparsity_target < 1.0)) throw ConfigError("sparsity_target must lie in [0,1)");
    if (prune_step < 1 || prune_start < 0 || prune_end < prune_start) throw ConfigError("invalid prune schedule");
  }
};

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
inline Network init_network(const std::vector<int>& arch, std::uint64_t seed) {
  if (arch.size() < 3) throw ConfigError("architecture needs an input size, at least one hidden layer and the output");
  if (arch.back() != 2) throw ConfigError("output layer must have 2 neurons");
  for (int s : arch)
    if (s < 1) throw ConfigError("layer sizes must be positive");
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 1; k < arch.size(); ++k) {
    const double lim = std::sqrt(6.0 / arch[k - 1]);
    std::uniform_real_distribution<double> u(-lim, lim);
    DenseLayer l{Matrix(arch[k], arch[k - 1]), Vector::Zero(arch[k])};
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = u(rng);
    layers.push_back(std::move(l));
  }
  return Network(arch.front(), std::move(layers));
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  double loss = 0.0;  // mean loss of the batch
};

namespace detail {

/// Columns of X are samples.
inline Gradients batch_gradients(const Network& net, const Matrix& X, const std::vector<ClassLabel>& y) {
  const auto B = X.cols();
  if (B == 0) throw ShapeError("gradient batch is empty");
  if (X.rows() != net.input_dim() || static_cast<Eigen::Index>(y.size()) != B) throw ShapeError("batch shape mismatch");
  const auto& layers = net.layers();
  std::vector<Matrix> acts{X};
  std::vector<Matrix> pre;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix z = layers[k].weights * acts.back();
    z.colwise() += layers[k].bias;
    pre.push_back(z);
    if (k + 1 < layers.size()) acts.push_back(z.cwiseMax(0.0));
  }
  // Softmax cross-entropy through log-sum-exp.
  const Matrix& Y = pre.back();
  Matrix delta(Y.rows(), B);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double m = Y.col(i).maxCoeff();
    const Vector e = (Y.col(i).array() - m).exp();
    const double s = e.sum();
    const int t = static_cast<int>(y[static_cast<std::size_t>(i)]);
    loss += std::log(s) + m - Y(t, i);
    delta.col(i) = e / s;
    delta(t, i) -= 1.0;
  }
  delta /= static_cast<double>(B);

  Gradients g;
  g.loss = loss / static_cast<double>(B);
  g.weights.resize(layers.size());
  g.bias.resize(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    g.weights[k] = delta * acts[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k == 0) break;
    Matrix back = layers[k].weights.transpose() * delta;
    delta = back.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

inline Matrix columns(const Dataset& d, const std::vector<int>& idx) {
  Matrix X(d.dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = d.inputs.row(idx[i]).transpose();
  return X;
}

inline std::vector<ClassLabel> labels_at(const Dataset& d, const std::vector<int>& idx) {
  std::vector<ClassLabel> y;
  for (int i : idx) y.push_back(d.labels[static_cast<std::size_t>(i)]);
  return y;
}

using Mask = std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>>;

inline Mask nonzero_mask(const Network& net) {
  Mask m;
  for (const auto& l : net.layers()) m.push_back(l.weights.array() != 0.0);
  return m;
}

inline Mask full_mask(const Network& net) {
  Mask m;
  for (const auto& l : net.layers()) m.push_back(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(l.weights.rows(), l.weights.cols(), true));
  return m;
}

inline void apply_mask(Network& net, const Mask& m) {
  auto& layers = net.mutable_layers();
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k].weights = m[k].select(layers[k].weights, 0.0);
}

/// Global magnitude pruning: zero the smallest |w| until `fraction` of all
/// weight entries are zero. Already pruned entries stay pruned.
inline void prune_to(Network& net, Mask& mask, double fraction) {
  std::vector<double> mags;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const auto& w = net.layers()[k].weights;
    for (Eigen::Index i = 0; i < w.size(); ++i) mags.push_back(mask[k](i) ? std::abs(w(i)) : -1.0);
  }
  const auto n_zero = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(mags.size()) - 1e-9));
  if (n_zero == 0) return;
  std::vector<std::size_t> order(mags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
  std::vector<char> drop(mags.size(), 0);
  for (std::size_t i = 0; i < std::min(n_zero, order.size()); ++i) drop[order[i]] = 1;
  std::size_t pos = 0;
  for (auto& m : mask)
    for (Eigen::Index i = 0; i < m.size(); ++i, ++pos)
      if (drop[pos]) m(i) = false;
  apply_mask(net, mask);
}

/// Cubic schedule from s0 at epoch `start` to s_f at epoch `end`.
inline double cubic_sparsity(double s0, double sf, int epoch, int start, int end) {
  if (epoch <= start) return s0;
  if (epoch >= end) return sf;
  const double frac = static_cast<double>(epoch - start) / static_cast<double>(end - start);
  return sf + (s0 - sf) * std::pow(1.0 - frac, 3);
}

inline void require_both_classes(const Dataset& d) {
  if (d.count(ClassLabel::Safe, Split::Train) == 0 || d.count(ClassLabel::Unsafe, Split::Train) == 0)
    throw DataError("training split must contain both classes");
}

/// Shared Adam loop. `prune` enables the schedule toward cfg.sparsity_target.
inline Network run_training(Network net, const Dataset& data, const TrainConfig& cfg, Mask mask, bool prune) {
  cfg.validate();
  data.validate();
  if (data.dim() != net.input_dim()) throw ShapeError("dataset dimension does not match the network");
  if (cfg.epochs == 0) return net;
  require_both_classes(data);
  apply_mask(net, mask);

  const auto train_idx = data.indices(Split::Train);
  const std::vector<int> probe(train_idx.begin(),
                               train_idx.begin() + std::min<std::ptrdiff_t>(cfg.probe_size, static_cast<std::ptrdiff_t>(train_idx.size())));
  const Matrix probe_X = columns(data, probe);
  const auto probe_y = labels_at(data, probe);

  auto& layers = net.mutable_layers();
  std::vector<Matrix> mW, vW;
  std::vector<Vector> mb, vb;
  for (const auto& l : layers) {
    mW.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    vW.push_back(mW.back());
    mb.push_back(Vector::Zero(l.bias.size()));
    vb.push_back(mb.back());
  }
  const double s0 = net.weight_sparsity();
  std::mt19937_64 rng(cfg.seed);
  auto order = train_idx;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (prune && epoch >= cfg.prune_start && epoch <= cfg.prune_end && (epoch - cfg.prune_start) % cfg.prune_step == 0)
      prune_to(net, mask, cubic_sparsity(s0, cfg.sparsity_target, epoch, cfg.prune_start, cfg.prune_end));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(at),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size))));
      const auto g = batch_gradients(net, columns(data, batch), labels_at(data, batch));
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < layers.size(); ++k) {
        mW[k] = cfg.beta1 * mW[k] + (1.0 - cfg.beta1) * g.weights[k];
        vW[k] = cfg.beta2 * vW[k] + (1.0 - cfg.beta2) * g.weights[k].cwiseAbs2();
        mb[k] = cfg.beta1 * mb[k] + (1.0 - cfg.beta1) * g.bias[k];
        vb[k] = cfg.beta2 * vb[k] + (1.0 - cfg.beta2) * g.bias[k].cwiseAbs2();
        layers[k].weights.array() -=
            cfg.learning_rate * (mW[k].array() / c1) / ((vW[k].array() / c2).sqrt() + cfg.eps_adam);
        layers[k].bias.array() -= cfg.learning_rate * (mb[k].array() / c1) / ((vb[k].array() / c2).sqrt() + cfg.eps_adam);
      }
      apply_mask(net, mask);
    }
    if (cfg.on_epoch) cfg.on_epoch(epoch, batch_gradients(net, probe_X, probe_y).loss);
  }
  // Short runs that stop before the schedule ends still honour the target.
  if (prune && net.weight_sparsity() < cfg.sparsity_target) prune_to(net, mask, cfg.sparsity_target);
  return net;
}

}  // namespace detail

/// Gradient of the mean loss over the given samples.
inline Gradients gradients(const Network& net, const std::vector<Vector>& inputs, const std::vector<ClassLabel>& labels) {
  if (inputs.empty()) throw ShapeError("gradient batch is empty");
  Matrix X(net.input_dim(), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    detail::check_input(net, inputs[i].size());
    X.col(static_cast<Eigen::Index>(i)) = inputs[i];
  }
  return detail::batch_gradients(net, X, labels);
}

inline Network train(const Network& net, const Dataset& data, const TrainConfig& cfg) {
  return detail::run_training(net, data, cfg, detail::full_mask(net), false);
}

/// Gradual magnitude pruning toward cfg.sparsity_target while retraining.
inline Network prune_retrain(const Network& net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.sparsity_target < net.weight_sparsity()) {
    std::clog << "warning: sparsity target " << cfg.sparsity_target << " is below the current sparsity "
              << net.weight_sparsity() << "; network returned unchanged\n";
    return net;
  }
  return detail::run_training(net, data, cfg, detail::nonzero_mask(net), cfg.sparsity_target > 0.0);
}

/// Counts with Safe as the positive class.
struct ConfusionMatrix {
  long tp_safe = 0;  // true safe, predicted safe
  long fn_safe = 0;  // true safe, predicted unsafe
  long fp_safe = 0;  // true unsafe, predicted safe
  long tn_safe = 0;  // true unsafe, predicted unsafe

  long total() const { return tp_safe + fn_safe + fp_safe + tn_safe; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp_safe + tn_safe) / static_cast<double>(total());
  }
};

inline ConfusionMatrix evaluate(const Network& net, const Dataset& data, Split split) {
  const auto idx = data.indices(split);
  if (idx.empty()) throw DataError(std::string("split '") + to_string(split) + "' is empty");
  ConfusionMatrix cm;
  for (int i : idx) {
    const bool truth_safe = data.labels[static_cast<std::size_t>(i)] == ClassLabel::Safe;
    const bool pred_safe = classify(net, data.row(i)) == ClassLabel::Safe;
    if (truth_safe) (pred_safe ? cm.tp_safe : cm.fn_safe)++;
    else (pred_safe ? cm.fp_safe : cm.tn_safe)++;
  }
  return cm;
}

struct LabeledSample {
  Vector x;
  ClassLabel label;
};

struct RetrainResult {
  Network network;
  Dataset dataset;  // training split augmented with the new samples
  int added = 0;
};

/// Adds oracle-labeled samples to the training split (skipping exact duplicates
/// of existing rows) and resumes training from `net`, keeping its zero pattern.
inline RetrainResult retrain_with_adversarials(const Network& net, const Dataset& data,
                                               const std::vector<LabeledSample>& adv, const TrainConfig& cfg) {
  RetrainResult out{net, data, 0};
  if (adv.empty()) {
    std::clog << "warning: no adversarial samples supplied; network returned unchanged\n";
    return out;
  }
  std::set<std::vector<double>> seen;
  for (int i = 0; i < data.size(); ++i) {
    const Vector r = data.row(i);
    seen.emplace(r.data(), r.data() + r.size());
  }
  for (const auto& s : adv) {
    if (s.x.size() != data.dim()) throw ShapeError("adversarial sample has wrong dimension");
    if (!seen.emplace(s.x.data(), s.x.data() + s.x.size()).second) continue;
    out.dataset.append(s.x, s.label, Split::Train);
    ++out.added;
  }
  if (out.added == 0) {
    std::clog << "warning: every adversarial sample duplicates an existing row; network returned unchanged\n";
    return out;
  }
  out.network = detail::run_training(net, out.dataset, cfg, detail::nonzero_mask(net), false);
  return out;
}

}  // namespace nnv
