#pragma once

// Dense feedforward classifier with Gaussian hidden units and a logistic
// output unit, trained by per-record backpropagation of the squared error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdp/random.hpp"

namespace hdp::nn {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// How the output delta is formed from the error signal.
enum class DeltaMode {
  Derivative,  // E * logistic'(z)
  Literal,     // E * logistic(z)
};

struct NetworkSpec {
  // Input width, one or more hidden widths, then the single output unit.
  std::vector<int> layer_sizes;

  int inputs() const { return layer_sizes.front(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }

  void validate() const {
    if (layer_sizes.size() < 3) throw NetworkError("network needs input, >= 1 hidden and output layer");
    if (layer_sizes.back() != 1) throw NetworkError("output layer must have exactly one unit");
    for (int s : layer_sizes) {
      if (s < 1) throw NetworkError("layer sizes must be >= 1");
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      n += static_cast<std::size_t>(layer_sizes[l]) * static_cast<std::size_t>(layer_sizes[l + 1]) +
           static_cast<std::size_t>(layer_sizes[l + 1]);
    }
    return n;
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline NetworkSpec make_spec(int inputs, const std::vector<int>& hidden) {
  NetworkSpec spec;
  spec.layer_sizes.push_back(inputs);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(1);
  spec.validate();
  return spec;
}

template <typename Scalar>
struct Layer {
  Matrix<Scalar> weights;  // fan_in x fan_out
  Vector<Scalar> bias;     // fan_out

  friend bool operator==(const Layer& a, const Layer& b) {
    return a.weights == b.weights && a.bias == b.bias;
  }
};

template <typename Scalar>
struct NetworkWeights {
  std::vector<Layer<Scalar>> layers;
  Scalar learning_rate = Scalar(0.05);

  bool all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const Layer<Scalar>& l) {
      return l.weights.allFinite() && l.bias.allFinite();
    });
  }

  friend bool operator==(const NetworkWeights& a, const NetworkWeights& b) {
    return a.layers == b.layers && a.learning_rate == b.learning_rate;
  }
};

using Weights = NetworkWeights<double>;

// exp(-x^2). The exponent is capped so the result never underflows to zero.
template <typename Scalar>
Scalar gaussian(Scalar x) {
  return std::exp(-std::min(x * x, Scalar(700)));
}

template <typename Scalar>
Scalar gaussian_derivative(Scalar x) {
  if (x * x > Scalar(700)) return Scalar(0);
  return Scalar(-2) * x * std::exp(-x * x);
}

// Pre-activation is clamped to +-30 so the output stays strictly inside (0,1).
template <typename Scalar>
Scalar logistic(Scalar z) {
  const Scalar c = std::clamp(z, Scalar(-30), Scalar(30));
  return Scalar(1) / (Scalar(1) + std::exp(-c));
}

template <typename Scalar>
Scalar logistic_derivative(Scalar z) {
  if (z < Scalar(-30) || z > Scalar(30)) return Scalar(0);
  const Scalar s = logistic(z);
  return s * (Scalar(1) - s);
}

template <typename Scalar>
NetworkWeights<Scalar> zero_weights(const NetworkSpec& spec, Scalar learning_rate = Scalar(0.05)) {
  spec.validate();
  NetworkWeights<Scalar> w;
  w.learning_rate = learning_rate;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    w.layers.push_back({Matrix<Scalar>::Zero(spec.layer_sizes[l], spec.layer_sizes[l + 1]),
                        Vector<Scalar>::Zero(spec.layer_sizes[l + 1])});
  }
  return w;
}

// Uniform in [-range, range], layer-major in flatten order.
template <typename Scalar>
NetworkWeights<Scalar> random_weights(const NetworkSpec& spec, Rng& rng, double range = 0.5,
                                      Scalar learning_rate = Scalar(0.05)) {
  auto w = zero_weights<Scalar>(spec, learning_rate);
  for (auto& layer : w.layers) {
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = Scalar(rng.uniform(-range, range));
    }
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias(j) = Scalar(rng.uniform(-range, range));
  }
  return w;
}

// Layer-major; within a layer the weights row by row (fan-in major), then the biases.
template <typename Scalar>
Vector<Scalar> flatten(const NetworkWeights<Scalar>& w) {
  Eigen::Index n = 0;
  for (const auto& l : w.layers) n += l.weights.size() + l.bias.size();
  Vector<Scalar> out(n);
  Eigen::Index k = 0;
  for (const auto& l : w.layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) out(k++) = l.weights(i, j);
    }
    for (Eigen::Index j = 0; j < l.bias.size(); ++j) out(k++) = l.bias(j);
  }
  return out;
}

template <typename Scalar, typename Derived>
NetworkWeights<Scalar> unflatten(const NetworkSpec& spec, const Eigen::MatrixBase<Derived>& flat,
                                 Scalar learning_rate = Scalar(0.05)) {
  if (static_cast<std::size_t>(flat.size()) != spec.parameter_count()) {
    throw NetworkError("unflatten: expected " + std::to_string(spec.parameter_count()) + " parameters, got " +
                       std::to_string(flat.size()));
  }
  auto w = zero_weights<Scalar>(spec, learning_rate);
  Eigen::Index k = 0;
  for (auto& l : w.layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = flat(k++);
    }
    for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias(j) = flat(k++);
  }
  return w;
}

template <typename Scalar>
struct ForwardTrace {
  // activations[0] is the input; activations[l + 1] is the output of layer l.
  std::vector<Vector<Scalar>> activations;
  std::vector<Vector<Scalar>> pre_activations;
  Scalar output = Scalar(0);
};

template <typename Scalar>
void check_shape(const NetworkSpec& spec, const NetworkWeights<Scalar>& w) {
  if (w.layers.size() != spec.layer_count()) throw NetworkError("weights do not match network spec");
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    if (w.layers[l].weights.rows() != spec.layer_sizes[l] || w.layers[l].weights.cols() != spec.layer_sizes[l + 1] ||
        w.layers[l].bias.size() != spec.layer_sizes[l + 1]) {
      throw NetworkError("layer " + std::to_string(l) + " shape does not match network spec");
    }
  }
}

// Gaussian for hidden layers, logistic for the output layer.
template <typename Derived>
typename Derived::PlainObject activate(const Eigen::MatrixBase<Derived>& pre, bool output_layer) {
  using Scalar = typename Derived::Scalar;
  if (output_layer) return pre.unaryExpr([](Scalar z) { return logistic(z); });
  return pre.unaryExpr([](Scalar z) { return gaussian(z); });
}

template <typename Scalar, typename Derived>
ForwardTrace<Scalar> forward(const NetworkSpec& spec, const NetworkWeights<Scalar>& w,
                             const Eigen::MatrixBase<Derived>& input) {
  check_shape(spec, w);
  if (input.size() != spec.inputs()) {
    throw NetworkError("forward: input has " + std::to_string(input.size()) + " values, network expects " +
                       std::to_string(spec.inputs()));
  }
  ForwardTrace<Scalar> trace;
  trace.activations.push_back(input.template cast<Scalar>());
  const std::size_t last = w.layers.size() - 1;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    Vector<Scalar> pre = w.layers[l].weights.transpose() * trace.activations.back() + w.layers[l].bias;
    Vector<Scalar> act = activate(pre, l == last);
    trace.pre_activations.push_back(std::move(pre));
    trace.activations.push_back(std::move(act));
  }
  trace.output = trace.activations.back()(0);
  return trace;
}

// Network output for every row of `inputs`.
template <typename Scalar, typename Derived>
Vector<Scalar> forward_batch(const NetworkSpec& spec, const NetworkWeights<Scalar>& w,
                             const Eigen::MatrixBase<Derived>& inputs) {
  check_shape(spec, w);
  if (inputs.cols() != spec.inputs()) throw NetworkError("forward_batch: column count does not match input layer");
  Matrix<Scalar> a = inputs.template cast<Scalar>();
  const std::size_t last = w.layers.size() - 1;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    Matrix<Scalar> pre = a * w.layers[l].weights;
    pre.rowwise() += w.layers[l].bias.transpose();
    a = activate(pre, l == last);
  }
  return a.col(0);
}

template <typename Scalar>
Scalar error_signal(Scalar target, Scalar output) {
  return target - output;
}

// Per-parameter weight correction alpha * delta * upstream activation, in the
// shape of the network. In Derivative mode this is -alpha times the gradient
// of 0.5 * E^2.
template <typename Scalar, typename Derived>
NetworkWeights<Scalar> weight_correction(const NetworkSpec& spec, const NetworkWeights<Scalar>& w,
                                         const Eigen::MatrixBase<Derived>& input, Scalar target,
                                         DeltaMode mode = DeltaMode::Derivative) {
  const auto trace = forward(spec, w, input);
  const Scalar err = error_signal(target, trace.output);
  const std::size_t last = w.layers.size() - 1;

  Vector<Scalar> delta(1);
  delta(0) = mode == DeltaMode::Derivative ? err * logistic_derivative(trace.pre_activations[last](0))
                                           : err * trace.output;

  auto correction = zero_weights<Scalar>(spec, w.learning_rate);
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    correction.layers[l].weights = w.learning_rate * trace.activations[l] * delta.transpose();
    correction.layers[l].bias = w.learning_rate * delta;
    if (l > 0) {
      const Vector<Scalar> back = w.layers[l].weights * delta;
      delta = back.cwiseProduct(trace.pre_activations[l - 1].unaryExpr(
          [](Scalar z) { return gaussian_derivative(z); }));
    }
  }
  return correction;
}

template <typename Scalar, typename Derived>
NetworkWeights<Scalar> backprop_step(const NetworkSpec& spec, const NetworkWeights<Scalar>& w,
                                     const Eigen::MatrixBase<Derived>& input, Scalar target,
                                     DeltaMode mode = DeltaMode::Derivative) {
  const auto correction = weight_correction(spec, w, input, target, mode);
  if (!correction.all_finite()) throw NetworkError("backprop_step: non-finite weight update");
  auto next = w;
  for (std::size_t l = 0; l < next.layers.size(); ++l) {
    next.layers[l].weights += correction.layers[l].weights;
    next.layers[l].bias += correction.layers[l].bias;
  }
  return next;
}

// Mean of squared errors (t - R)^2 over the rows.
template <typename Scalar, typename DerivedX, typename DerivedY>
Scalar mean_squared_error(const NetworkSpec& spec, const NetworkWeights<Scalar>& w,
                          const Eigen::MatrixBase<DerivedX>& inputs, const Eigen::MatrixBase<DerivedY>& targets) {
  if (inputs.rows() == 0) return Scalar(0);
  const Vector<Scalar> out = forward_batch(spec, w, inputs);
  return (targets.template cast<Scalar>() - out).squaredNorm() / Scalar(inputs.rows());
}

template <typename Scalar>
struct TrainResult {
  NetworkWeights<Scalar> weights;
  std::vector<Scalar> loss_history;  // MSE after each epoch
};

// Visiting order is a seeded shuffle of the rows in lexicographic order, so it
// depends on the row contents rather than their position in `inputs`.
template <typename DerivedX>
std::vector<Eigen::Index> canonical_order(const Eigen::MatrixBase<DerivedX>& inputs, const Eigen::VectorXd& targets) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
      if (inputs(a, c) != inputs(b, c)) return inputs(a, c) < inputs(b, c);
    }
    return targets(a) < targets(b);
  });
  return order;
}

template <typename Scalar, typename DerivedX>
TrainResult<Scalar> train_epochs(const NetworkSpec& spec, NetworkWeights<Scalar> w,
                                 const Eigen::MatrixBase<DerivedX>& inputs, const Eigen::VectorXd& targets, int epochs,
                                 Scalar learning_rate, std::uint64_t seed, DeltaMode mode = DeltaMode::Derivative) {
  if (epochs < 0) throw NetworkError("train_epochs: epochs must be >= 0");
  if (inputs.rows() == 0) throw NetworkError("train_epochs: empty training set");
  if (inputs.rows() != targets.size()) throw NetworkError("train_epochs: inputs and targets differ in length");
  w.learning_rate = learning_rate;
  TrainResult<Scalar> result;
  auto order = canonical_order(inputs, targets);
  Rng rng(seed);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (auto row : order) {
      w = backprop_step(spec, w, inputs.row(row).transpose(), Scalar(targets(row)), mode);
    }
    result.loss_history.push_back(mean_squared_error(spec, w, inputs, targets));
  }
  result.weights = std::move(w);
  return result;
}

// Abnormal (1) iff the output reaches the threshold.
template <typename Scalar, typename Derived>
int classify(const NetworkSpec& spec, const NetworkWeights<Scalar>& w, const Eigen::MatrixBase<Derived>& input,
             double threshold = 0.5) {
  return static_cast<double>(forward(spec, w, input).output) >= threshold ? 1 : 0;
}

}  // namespace hdp::nn
