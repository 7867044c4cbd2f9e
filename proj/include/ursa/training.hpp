#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "ursa/augment.hpp"
#include "ursa/data.hpp"
#include "ursa/head.hpp"
#include "ursa/rng.hpp"
#include "ursa/ursa_layer.hpp"

namespace ursa {

enum class OptimizerKind { sgd, adam };
enum class Precision { f32, f64 };

inline constexpr double kProbabilityFloor = 1e-12;

struct TrainConfig {
  Measure measure = Measure::gaussian;
  std::size_t stars = 256;
  double sigma = 0.1;
  double lambda = 10.0;
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 250;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;
  AugmentConfig augmentation;
  double dropout_rate = 0.3;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  std::vector<std::size_t> snapshot_epochs{0, 10, 100, 200, 300, 500};
  Precision precision = Precision::f32;

  void validate() const;  // throws ConfigError
  ModelInit model_init() const;
  ModelShape model_shape(std::size_t dim, std::size_t classes) const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN when no test set was given
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_test_accuracy = 0.0;  // NaN without a test set

  // Header "epoch,train_loss,train_acc,test_acc,seconds", one row per epoch.
  void write_csv(std::ostream& out) const;
};

// -log(max(p[label], 1e-12))
template <typename T>
T cross_entropy_loss(std::span<const T> probs, std::size_t label);

// Loss, predictions and gradients for one minibatch through the complete
// model in train mode. Dropout masks are drawn from `dropout_rng`.
template <typename T>
struct BatchResult {
  double loss = 0.0;  // mean cross-entropy
  std::size_t correct = 0;
  ModelGrads<T> grads;
  HeadCache<T> cache;
};

template <typename T>
BatchResult<T> batch_gradients(const ModelParams<T>& model, std::span<const PointCloud<T>> clouds,
                               std::span<const std::size_t> labels, Rng& dropout_rng, std::size_t threads = 1);

// Forward-only counterpart of batch_gradients; draws the same dropout mask
// from an identically seeded rng.
template <typename T>
double batch_loss(const ModelParams<T>& model, std::span<const PointCloud<T>> clouds,
                  std::span<const std::size_t> labels, Mode mode, Rng& dropout_rng);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {}

  // p ← p - lr·g (SGD) or the bias-corrected Adam update.
  void step(const std::vector<ParamBlock<T>>& blocks);
  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  OptimizerSettings settings_;
  std::vector<Matrix<T>> first_moment_;
  std::vector<Matrix<T>> second_moment_;
  std::size_t steps_ = 0;
};

// Owns the model, optimizer state and random stream of one training run.
template <typename T>
class Trainer {
 public:
  // Seeds one Rng with config.seed; the model initialisation consumes the
  // first draws and shuffling, augmentation bases and dropout use the rest.
  Trainer(const TrainConfig& config, const ModelShape& shape, std::size_t threads = 1);

  // One shuffled pass over `train`, with per-sample augmentation and BN in
  // train mode. Throws NumericalAbort on a non-finite loss.
  EpochStats train_epoch(const LabeledCloudSet& train);

  const ModelParams<T>& model() const noexcept { return model_; }
  ModelParams<T>& model() noexcept { return model_; }
  std::size_t epochs_done() const noexcept { return epochs_done_; }

 private:
  TrainConfig config_;
  Rng rng_;
  ModelParams<T> model_;
  Optimizer<T> optimizer_;
  std::size_t threads_;
  std::size_t epochs_done_ = 0;
};

// Eval-mode argmax class for every sample (ties go to the lower index).
template <typename T>
std::vector<std::size_t> predict(const ModelParams<T>& model, const LabeledCloudSet& set, std::size_t threads = 1);

// Fraction of argmax-correct predictions in eval mode.
template <typename T>
double evaluate(const ModelParams<T>& model, const LabeledCloudSet& set, std::size_t threads = 1);

struct TrainCallbacks {
  std::function<void(const EpochStats&)> on_epoch;
  // Called with epoch 0 before training and after each listed epoch.
  std::function<void(std::size_t epoch, const Matrix<double>& stars)> on_snapshot;
};

template <typename T>
struct TrainResult {
  ModelParams<T> model;
  TrainReport report;
};

// Full run: init, `config.epochs` epochs, test accuracy after each epoch
// when `test` is non-null.
template <typename T>
TrainResult<T> run_training(const TrainConfig& config, const LabeledCloudSet& train, const LabeledCloudSet* test,
                            const TrainCallbacks& callbacks = {}, std::size_t threads = 1);

}  // namespace ursa
