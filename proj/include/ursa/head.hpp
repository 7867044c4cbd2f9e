#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ursa/linalg.hpp"
#include "ursa/rng.hpp"
#include "ursa/ursa_layer.hpp"

namespace ursa {

enum class Mode { train, eval };

// y = x Wᵀ + b with W stored out×in and b as 1×out.
template <typename T>
struct DenseLayer {
  Matrix<T> weights;
  Matrix<T> bias;

  std::size_t in() const noexcept { return weights.cols(); }
  std::size_t out() const noexcept { return weights.rows(); }
};

template <typename T>
struct BatchNormState {
  Matrix<T> gamma;
  Matrix<T> beta;
  Matrix<T> running_mean;
  Matrix<T> running_var;
  T momentum = T(0.9);
  T epsilon = T(1e-5);

  std::size_t width() const noexcept { return gamma.cols(); }
};

struct ModelShape {
  std::size_t stars = 256;
  std::size_t dim = 2;
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;
  std::size_t classes = 10;

  // m·d + Σ(in·out + out) + Σ 2·width
  std::size_t trainable_parameter_count() const noexcept;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Ursa layer followed by
//   dense(m→h1) → ReLU → BN → dense(h1→h2) → ReLU → BN → dropout → dense(h2→k) → softmax.
template <typename T>
struct ModelParams {
  Constellation<T> constellation;
  std::array<DenseLayer<T>, 3> dense;
  std::array<BatchNormState<T>, 2> bn;
  T dropout_rate = T(0.3);
  std::size_t class_count = 0;

  ModelShape shape() const;
  std::size_t trainable_parameter_count() const;
  void validate() const;  // throws ContractViolation on inconsistent shapes
};

struct ModelInit {
  Measure measure = Measure::gaussian;
  double sigma = 0.1;
  double lambda = 10.0;
  double dropout_rate = 0.3;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
};

// Stars uniform in [-1, 1], dense weights Glorot-uniform, biases zero,
// BN gamma = 1, beta = 0, running mean 0 and variance 1.
template <typename T>
ModelParams<T> init_model(Rng& rng, const ModelShape& shape, const ModelInit& init);

template <typename To, typename From>
ModelParams<To> convert_model(const ModelParams<From>& from);

// Gradients mirror the trainable parameters.
template <typename T>
struct ModelGrads {
  Matrix<T> stars;
  std::array<DenseLayer<T>, 3> dense;
  std::array<Matrix<T>, 2> bn_gamma;
  std::array<Matrix<T>, 2> bn_beta;

  static ModelGrads zeros_like(const ModelParams<T>& params);
};

// Named view of one trainable tensor and its gradient.
template <typename T>
struct ParamBlock {
  std::string name;
  Matrix<T>* value;
  Matrix<T>* grad;
};

// Fixed order: stars, dense0.{w,b}, bn0.{gamma,beta}, dense1.{w,b}, bn1.{gamma,beta}, dense2.{w,b}.
template <typename T>
std::vector<ParamBlock<T>> param_blocks(ModelParams<T>& params, ModelGrads<T>& grads);

// Per-layer intermediate values kept for the backward pass.
template <typename T>
struct HeadCache {
  Mode mode = Mode::eval;
  bool valid = false;
  Matrix<T> input;
  std::array<Matrix<T>, 2> pre_activation;  // z = xWᵀ + b
  std::array<Matrix<T>, 2> normalized;      // x̂
  std::array<Matrix<T>, 2> inv_std;         // 1×width
  std::array<Matrix<T>, 2> batch_mean;
  std::array<Matrix<T>, 2> batch_var;
  std::array<Matrix<T>, 2> bn_output;
  Matrix<T> dropout_scale;  // 0 or 1/(1-rate) per entry; empty in eval mode
  Matrix<T> dropped;
  Matrix<T> logits;
  Matrix<T> probs;
};

template <typename T>
struct HeadGrads {
  std::array<DenseLayer<T>, 3> dense;
  std::array<Matrix<T>, 2> bn_gamma;
  std::array<Matrix<T>, 2> bn_beta;
  Matrix<T> features;  // B×m, feeds the Ursa layer's backward
};

// Class probabilities (B×k) for a batch of feature rows (B×m). Does not touch
// the BN running statistics; call update_running_stats after a train-mode
// pass. Dropout draws come from `rng` in train mode only.
template <typename T>
Matrix<T> head_forward(const ModelParams<T>& params, const Matrix<T>& features, Mode mode, Rng& rng,
                       HeadCache<T>* cache = nullptr);

template <typename T>
void update_running_stats(ModelParams<T>& params, const HeadCache<T>& cache);

// Backward from ∂loss/∂probabilities.
template <typename T>
HeadGrads<T> head_backward(const ModelParams<T>& params, const HeadCache<T>& cache,
                           const Matrix<T>& grad_probs);

// Backward from ∂loss/∂logits (skips the softmax Jacobian).
template <typename T>
HeadGrads<T> head_backward_from_logits(const ModelParams<T>& params, const HeadCache<T>& cache,
                                       const Matrix<T>& grad_logits);

// Row-wise softmax with max subtraction.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits);

// Inverted dropout: train mode zeroes each entry with probability `rate` and
// scales survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
std::vector<T> dropout(std::span<const T> x, T rate, Mode mode, Rng& rng);

}  // namespace ursa
