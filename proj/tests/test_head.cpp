#include <cmath>
#include <functional>

#include "doctest.h"
#include "ursa/head.hpp"

using namespace ursa;

namespace {

ModelParams<double> small_model(std::uint64_t seed, double dropout_rate) {
  Rng rng(seed);
  ModelInit init;
  init.dropout_rate = dropout_rate;
  auto model = init_model<double>(rng, ModelShape{4, 2, 5, 4, 3}, init);
  for (auto& layer : model.dense)
    for (auto& b : layer.bias.values()) b = rng.uniform(-0.5, 0.5);
  for (auto& norm : model.bn) {
    for (auto& g : norm.gamma.values()) g = rng.uniform(0.5, 1.5);
    for (auto& b : norm.beta.values()) b = rng.uniform(-0.5, 0.5);
  }
  return model;
}

double weighted_probs(const Matrix<double>& probs, const Matrix<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += probs[i] * w[i];
  return s;
}

}  // namespace

TEST_CASE("zero weights give the uniform distribution") {
  auto model = small_model(1, 0.3);
  for (auto& layer : model.dense) {
    layer.weights.fill(0.0);
    layer.bias.fill(0.0);
  }
  for (auto& norm : model.bn) norm.beta.fill(0.0);
  Rng rng(2);
  const auto probs = head_forward(model, sample_uniform<double>(rng, 0.0, 3.0, 6, 4), Mode::eval, rng);
  for (double p : probs.values()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("eval mode is deterministic and leaves the rng alone") {
  const auto model = small_model(3, 0.3);
  Rng data(4);
  const auto x = sample_uniform<double>(data, 0.0, 2.0, 5, 4);
  Rng rng(5);
  const auto a = head_forward(model, x, Mode::eval, rng);
  const auto b = head_forward(model, x, Mode::eval, rng);
  CHECK(a == b);
  Rng fresh(5);
  CHECK(rng.next_u64() == fresh.next_u64());
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(6);
  const auto logits = sample_uniform<double>(rng, -5.0, 5.0, 4, 7);
  auto shifted = logits;
  for (auto& v : shifted.values()) v += 123.25;
  const auto a = softmax_rows(logits);
  const auto b = softmax_rows(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (double p : a.row(r)) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  }
  const auto big = softmax_rows(Matrix<double>{{1000.0, 0.0}});
  CHECK(big.all_finite());
}

TEST_CASE("shape mismatch is a contract violation") {
  const auto model = small_model(7, 0.3);
  Rng rng(1);
  CHECK_THROWS_AS(head_forward(model, Matrix<double>(2, 5), Mode::eval, rng), ContractViolation);
  HeadCache<double> stale;
  CHECK_THROWS_AS(head_backward(model, stale, Matrix<double>(2, 3)), ContractViolation);
  HeadCache<double> cache;
  head_forward(model, Matrix<double>(2, 4, 0.5), Mode::train, rng, &cache);
  CHECK_THROWS_AS(head_backward(model, cache, Matrix<double>(3, 3)), ContractViolation);
}

TEST_CASE("zero upstream gives all-zero parameter gradients") {
  const auto model = small_model(8, 0.3);
  Rng rng(9);
  const auto x = sample_uniform<double>(rng, 0.0, 2.0, 4, 4);
  HeadCache<double> cache;
  head_forward(model, x, Mode::train, rng, &cache);
  const auto g = head_backward(model, cache, Matrix<double>(4, 3));
  for (const auto& layer : g.dense) {
    CHECK(max_abs(layer.weights) == 0.0);
    CHECK(max_abs(layer.bias) == 0.0);
  }
  for (int l = 0; l < 2; ++l) {
    CHECK(max_abs(g.bn_gamma[l]) == 0.0);
    CHECK(max_abs(g.bn_beta[l]) == 0.0);
  }
  CHECK(max_abs(g.features) == 0.0);
}

TEST_CASE("head gradients match central differences") {
  for (Mode mode : {Mode::train, Mode::eval}) {
    auto model = small_model(10, 0.3);
    if (mode == Mode::eval)
      for (auto& norm : model.bn) {
        for (auto& v : norm.running_mean.values()) v = 0.2;
        for (auto& v : norm.running_var.values()) v = 0.7;
      }
    Rng data(11);
    auto x = sample_uniform<double>(data, 0.0, 3.0, 4, 4);
    const auto w = sample_uniform<double>(data, -1.0, 1.0, 4, 3);
    constexpr std::uint64_t mask_seed = 99;

    auto loss = [&] {
      Rng rng(mask_seed);
      return weighted_probs(head_forward(model, x, mode, rng), w);
    };
    Rng rng(mask_seed);
    HeadCache<double> cache;
    head_forward(model, x, mode, rng, &cache);
    const auto g = head_backward(model, cache, w);

    auto check_block = [&](Matrix<double>& value, const Matrix<double>& analytic) {
      REQUIRE(value.same_shape(analytic));
      Matrix<double> numeric(value.rows(), value.cols());
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double orig = value[i];
        value[i] = orig + 1e-5;
        const double up = loss();
        value[i] = orig - 1e-5;
        const double down = loss();
        value[i] = orig;
        numeric[i] = (up - down) / 2e-5;
      }
      const double scale = std::max(max_abs(analytic), max_abs(numeric));
      double worst = 0.0;
      for (std::size_t i = 0; i < value.size(); ++i) worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
      CHECK(scale > 0.0);
      CHECK(worst / scale <= 1e-4);
    };
    for (int l = 0; l < 3; ++l) {
      check_block(model.dense[l].weights, g.dense[l].weights);
      check_block(model.dense[l].bias, g.dense[l].bias);
    }
    for (int l = 0; l < 2; ++l) {
      check_block(model.bn[l].gamma, g.bn_gamma[l]);
      check_block(model.bn[l].beta, g.bn_beta[l]);
    }
    check_block(x, g.features);
  }
}

TEST_CASE("running statistics follow the momentum rule") {
  auto model = small_model(12, 0.0);
  Rng rng(13);
  const auto x = sample_uniform<double>(rng, 0.0, 3.0, 8, 4);
  HeadCache<double> cache;
  const auto before = model.bn[0].running_mean;
  head_forward(model, x, Mode::train, rng, &cache);
  CHECK(model.bn[0].running_mean == before);
  update_running_stats(model, cache);
  for (std::size_t c = 0; c < before.cols(); ++c) {
    CHECK(model.bn[0].running_mean(0, c) ==
          doctest::Approx(0.9 * before(0, c) + 0.1 * cache.batch_mean[0](0, c)).epsilon(1e-15));
    CHECK(model.bn[0].running_var(0, c) ==
          doctest::Approx(0.9 * 1.0 + 0.1 * cache.batch_var[0](0, c)).epsilon(1e-15));
  }
}

TEST_CASE("dropout behaviour") {
  Rng rng(14);
  std::vector<double> x(100000, 1.0);
  CHECK(dropout<double>(x, 0.0, Mode::train, rng) == x);
  CHECK(dropout<double>(x, 0.0, Mode::eval, rng) == x);
  CHECK(dropout<double>(x, 0.3, Mode::eval, rng) == x);
  const auto y = dropout<double>(x, 0.3, Mode::train, rng);
  std::size_t zeros = 0;
  for (double v : y) {
    if (v == 0.0)
      ++zeros;
    else
      CHECK(v == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
  }
  CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.3) <= 0.01);
  CHECK_THROWS_AS(dropout<double>(x, 1.0, Mode::train, rng), ContractViolation);
  CHECK_THROWS_AS(dropout<double>(x, -0.1, Mode::train, rng), ContractViolation);
}

TEST_CASE("parameter count for 512 stars, 3 dims and 40 classes") {
  const ModelShape shape{512, 3, 512, 256, 40};
  CHECK(shape.trainable_parameter_count() == 1536 + 262656 + 131328 + 10280 + 1024 + 512);
  CHECK(shape.trainable_parameter_count() == 407336);
  Rng rng(15);
  const auto model = init_model<float>(rng, shape, ModelInit{});
  CHECK(model.trainable_parameter_count() == 407336);
  CHECK(model.shape() == shape);
}

TEST_CASE("initialisation ranges") {
  Rng rng(16);
  const auto model = init_model<double>(rng, ModelShape{64, 2, 32, 16, 10}, ModelInit{});
  const double limit0 = std::sqrt(6.0 / (64 + 32));
  CHECK(max_abs(model.dense[0].weights) <= limit0);
  CHECK(max_abs(model.dense[0].weights) > 0.9 * limit0);
  CHECK(max_abs(model.dense[2].bias) == 0.0);
  for (double g : model.bn[1].gamma.values()) CHECK(g == 1.0);
  for (double v : model.bn[1].running_var.values()) CHECK(v == 1.0);
  CHECK(max_abs(model.constellation.stars) <= 1.0);
  CHECK_NOTHROW(model.validate());
  const auto f = convert_model<float>(model);
  CHECK(f.dense[1].weights(3, 2) == static_cast<float>(model.dense[1].weights(3, 2)));
}
