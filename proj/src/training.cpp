#include "ursa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ursa/error.hpp"
#include "ursa/parallel.hpp"

namespace ursa {

void TrainConfig::validate() const {
  if (stars == 0) throw ConfigError("stars must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (hidden1 == 0 || hidden2 == 0) throw ConfigError("hidden widths must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("batch-norm momentum must be in (0, 1)");
  if (!(bn_epsilon > 0.0)) throw ConfigError("batch-norm epsilon must be positive");
  augmentation.validate();
}

ModelInit TrainConfig::model_init() const {
  return ModelInit{measure, sigma, lambda, dropout_rate, bn_momentum, bn_epsilon};
}

ModelShape TrainConfig::model_shape(std::size_t dim, std::size_t classes) const {
  return ModelShape{stars, dim, hidden1, hidden2, classes};
}

void TrainReport::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,train_acc,test_acc,seconds\n";
  auto old_precision = out.precision(10);
  for (const auto& e : epochs)
    out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.test_accuracy << ',' << e.seconds
        << '\n';
  out.precision(old_precision);
}

template <typename T>
T cross_entropy_loss(std::span<const T> probs, std::size_t label) {
  require(label < probs.size(), "cross_entropy_loss: label out of range");
  return -std::log(std::max(probs[label], static_cast<T>(kProbabilityFloor)));
}

namespace {

template <typename T>
std::size_t argmax(std::span<const T> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Features for every cloud, plus per-cloud star Jacobians when requested.
template <typename T>
Matrix<T> batch_features(const Constellation<T>& constellation, std::span<const PointCloud<T>> clouds,
                         std::vector<Matrix<T>>* jacobians, std::size_t threads) {
  Matrix<T> features(clouds.size(), constellation.m());
  if (jacobians) jacobians->assign(clouds.size(), Matrix<T>());
  parallel_for(clouds.size(), threads, [&](std::size_t b) {
    auto row = features.row(b);
    if (jacobians) {
      auto out = forward_with_jacobian(clouds[b], constellation);
      std::copy(out.features.begin(), out.features.end(), row.begin());
      (*jacobians)[b] = std::move(out.star_jacobian);
    } else {
      const auto v = forward(clouds[b], constellation);
      std::copy(v.begin(), v.end(), row.begin());
    }
  });
  return features;
}

}  // namespace

template <typename T>
BatchResult<T> batch_gradients(const ModelParams<T>& model, std::span<const PointCloud<T>> clouds,
                               std::span<const std::size_t> labels, Rng& dropout_rng, std::size_t threads) {
  require(!clouds.empty() && clouds.size() == labels.size(), "batch_gradients: clouds/labels size mismatch");
  const std::size_t batch = clouds.size();
  std::vector<Matrix<T>> jacobians;
  const Matrix<T> features = batch_features<T>(model.constellation, clouds, &jacobians, threads);

  BatchResult<T> result;
  const Matrix<T> probs = head_forward(model, features, Mode::train, dropout_rng, &result.cache);

  // Softmax + mean cross-entropy: ∂L/∂z = (p - onehot) / B
  Matrix<T> grad_logits = probs;
  const T inv_b = T{1} / static_cast<T>(batch);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    require(labels[b] < model.class_count, "batch_gradients: label out of range");
    loss += static_cast<double>(cross_entropy_loss<T>(probs.row(b), labels[b]));
    if (argmax<T>(probs.row(b)) == labels[b]) ++result.correct;
    grad_logits(b, labels[b]) -= T{1};
  }
  for (T& g : grad_logits.values()) g *= inv_b;
  result.loss = loss / static_cast<double>(batch);

  HeadGrads<T> head = head_backward_from_logits(model, result.cache, grad_logits);
  result.grads.dense = std::move(head.dense);
  result.grads.bn_gamma = std::move(head.bn_gamma);
  result.grads.bn_beta = std::move(head.bn_beta);

  // Star gradient sums sample contributions in batch order.
  result.grads.stars = Matrix<T>(model.constellation.m(), model.constellation.d());
  for (std::size_t b = 0; b < batch; ++b) {
    const auto upstream = head.features.row(b);
    const Matrix<T>& jac = jacobians[b];
    for (std::size_t i = 0; i < jac.rows(); ++i)
      for (std::size_t k = 0; k < jac.cols(); ++k) result.grads.stars(i, k) += upstream[i] * jac(i, k);
  }
  return result;
}

template <typename T>
double batch_loss(const ModelParams<T>& model, std::span<const PointCloud<T>> clouds,
                  std::span<const std::size_t> labels, Mode mode, Rng& dropout_rng) {
  require(!clouds.empty() && clouds.size() == labels.size(), "batch_loss: clouds/labels size mismatch");
  const Matrix<T> features = batch_features<T>(model.constellation, clouds, nullptr, 1);
  const Matrix<T> probs = head_forward(model, features, mode, dropout_rng);
  double loss = 0.0;
  for (std::size_t b = 0; b < clouds.size(); ++b)
    loss += static_cast<double>(cross_entropy_loss<T>(probs.row(b), labels[b]));
  return loss / static_cast<double>(clouds.size());
}

template <typename T>
void Optimizer<T>::step(const std::vector<ParamBlock<T>>& blocks) {
  ++steps_;
  const T lr = static_cast<T>(settings_.learning_rate);
  if (settings_.kind == OptimizerKind::sgd) {
    for (const auto& b : blocks) {
      require(b.value->same_shape(*b.grad), "optimizer: gradient shape mismatch for " + b.name);
      for (std::size_t i = 0; i < b.value->size(); ++i) (*b.value)[i] -= lr * (*b.grad)[i];
    }
    return;
  }
  if (first_moment_.empty()) {
    for (const auto& b : blocks) {
      first_moment_.emplace_back(b.value->rows(), b.value->cols());
      second_moment_.emplace_back(b.value->rows(), b.value->cols());
    }
  }
  require(first_moment_.size() == blocks.size(), "optimizer: parameter block count changed");
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(settings_.beta1), b2 = static_cast<T>(settings_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(settings_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(settings_.beta2, t));
  const T eps = static_cast<T>(settings_.epsilon);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    Matrix<T>& p = *blocks[k].value;
    const Matrix<T>& g = *blocks[k].grad;
    require(p.same_shape(g) && p.same_shape(first_moment_[k]), "optimizer: gradient shape mismatch for " + blocks[k].name);
    Matrix<T>& m1 = first_moment_[k];
    Matrix<T>& m2 = second_moment_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m1[i] = b1 * m1[i] + (T{1} - b1) * g[i];
      m2[i] = b2 * m2[i] + (T{1} - b2) * g[i] * g[i];
      const T mhat = m1[i] / correction1;
      const T vhat = m2[i] / correction2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
Trainer<T>::Trainer(const TrainConfig& config, const ModelShape& shape, std::size_t threads)
    : config_(config),
      rng_(config.seed),
      model_((config.validate(), init_model<T>(rng_, shape, config.model_init()))),
      optimizer_(OptimizerSettings{config.optimizer, config.learning_rate, config.beta1, config.beta2,
                                   config.adam_epsilon}),
      threads_(std::max<std::size_t>(threads, 1)) {}

namespace {

template <typename T>
std::string parameter_norms(ModelParams<T>& model) {
  ModelGrads<T> dummy = ModelGrads<T>::zeros_like(model);
  std::ostringstream out;
  bool first = true;
  for (const auto& b : param_blocks(model, dummy)) {
    out << (first ? "" : ", ") << b.name << "=" << frobenius_norm(*b.value);
    first = false;
  }
  return out.str();
}

}  // namespace

template <typename T>
EpochStats Trainer<T>::train_epoch(const LabeledCloudSet& train) {
  require(train.size() > 0, "train_epoch: empty dataset");
  require(train.d == model_.constellation.d(), "train_epoch: dataset dimension != model dimension");
  require(train.class_count <= model_.class_count, "train_epoch: dataset has more classes than the model");
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng_);
  const std::uint64_t augment_base = rng_.next_u64();

  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t batch_index = 0;
  std::vector<PointCloud<T>> clouds;
  std::vector<std::size_t> labels;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    clouds.assign(end - begin, PointCloud<T>());
    labels.resize(end - begin);
    parallel_for(end - begin, threads_, [&](std::size_t b) {
      const std::size_t idx = order[begin + b];
      PointCloud<T> cloud = train.cloud<T>(idx);
      if (config_.augmentation.enabled) {
        Rng sample_rng(derive_seed(augment_base, idx));
        cloud = augment(cloud, config_.augmentation, sample_rng);
      }
      clouds[b] = std::move(cloud);
      labels[b] = train.labels[idx];
    });

    BatchResult<T> r = batch_gradients<T>(model_, clouds, labels, rng_, threads_);
    if (!std::isfinite(r.loss))
      throw NumericalAbort("non-finite loss in epoch " + std::to_string(epochs_done_ + 1) + ", batch " +
                           std::to_string(batch_index) + "; parameter norms: " + parameter_norms(model_));
    loss_sum += r.loss * static_cast<double>(end - begin);
    correct += r.correct;

    update_running_stats(model_, r.cache);
    optimizer_.step(param_blocks(model_, r.grads));
  }
  ++epochs_done_;

  EpochStats stats;
  stats.epoch = epochs_done_;
  stats.train_loss = loss_sum / static_cast<double>(train.size());
  stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  stats.test_accuracy = std::numeric_limits<double>::quiet_NaN();
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

template <typename T>
std::vector<std::size_t> predict(const ModelParams<T>& model, const LabeledCloudSet& set, std::size_t threads) {
  require(set.size() > 0, "predict: empty dataset");
  require(set.d == model.constellation.d(), "predict: dataset dimension != model dimension");
  constexpr std::size_t chunk = 256;
  std::vector<std::size_t> out(set.size());
  Rng unused(0);
  std::vector<PointCloud<T>> clouds;
  for (std::size_t begin = 0; begin < set.size(); begin += chunk) {
    const std::size_t end = std::min(set.size(), begin + chunk);
    clouds.clear();
    for (std::size_t i = begin; i < end; ++i) clouds.push_back(set.cloud<T>(i));
    const Matrix<T> features = batch_features<T>(model.constellation, clouds, nullptr, threads);
    const Matrix<T> probs = head_forward(model, features, Mode::eval, unused);
    for (std::size_t b = 0; b < probs.rows(); ++b) out[begin + b] = argmax<T>(probs.row(b));
  }
  return out;
}

template <typename T>
double evaluate(const ModelParams<T>& model, const LabeledCloudSet& set, std::size_t threads) {
  require(set.size() > 0, "evaluate: empty dataset");
  const auto predicted = predict(model, set, threads);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) correct += predicted[i] == set.labels[i];
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

template <typename T>
TrainResult<T> run_training(const TrainConfig& config, const LabeledCloudSet& train, const LabeledCloudSet* test,
                            const TrainCallbacks& callbacks, std::size_t threads) {
  config.validate();
  train.validate();
  if (test) {
    test->validate();
    require(test->d == train.d, "run_training: train/test dimension mismatch");
  }
  const std::size_t classes = std::max(train.class_count, test ? test->class_count : 0);
  Trainer<T> trainer(config, config.model_shape(train.d, classes), threads);
  auto wants_snapshot = [&](std::size_t epoch) {
    return std::find(config.snapshot_epochs.begin(), config.snapshot_epochs.end(), epoch) !=
           config.snapshot_epochs.end();
  };
  if (callbacks.on_snapshot && wants_snapshot(0))
    callbacks.on_snapshot(0, cast<double>(trainer.model().constellation.stars));

  TrainResult<T> result;
  result.report.final_test_accuracy = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochStats stats = trainer.train_epoch(train);
    if (test) {
      const auto t0 = std::chrono::steady_clock::now();
      stats.test_accuracy = evaluate(trainer.model(), *test, threads);
      stats.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.report.final_test_accuracy = stats.test_accuracy;
    }
    result.report.epochs.push_back(stats);
    if (callbacks.on_epoch) callbacks.on_epoch(stats);
    if (callbacks.on_snapshot && wants_snapshot(stats.epoch))
      callbacks.on_snapshot(stats.epoch, cast<double>(trainer.model().constellation.stars));
  }
  result.model = trainer.model();
  return result;
}

#define URSA_INSTANTIATE(T)                                                                                     \
  template T cross_entropy_loss(std::span<const T>, std::size_t);                                               \
  template BatchResult<T> batch_gradients(const ModelParams<T>&, std::span<const PointCloud<T>>,                \
                                          std::span<const std::size_t>, Rng&, std::size_t);                     \
  template double batch_loss(const ModelParams<T>&, std::span<const PointCloud<T>>, std::span<const std::size_t>, \
                             Mode, Rng&);                                                                       \
  template class Optimizer<T>;                                                                                  \
  template class Trainer<T>;                                                                                    \
  template std::vector<std::size_t> predict(const ModelParams<T>&, const LabeledCloudSet&, std::size_t);        \
  template double evaluate(const ModelParams<T>&, const LabeledCloudSet&, std::size_t);                         \
  template TrainResult<T> run_training(const TrainConfig&, const LabeledCloudSet&, const LabeledCloudSet*,      \
                                       const TrainCallbacks&, std::size_t);

URSA_INSTANTIATE(float)
URSA_INSTANTIATE(double)

#undef URSA_INSTANTIATE

}  // namespace ursa
