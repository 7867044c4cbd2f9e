#include "ursa/head.hpp"

#include <algorithm>
#include <cmath>

#include "ursa/error.hpp"

namespace ursa {

std::size_t ModelShape::trainable_parameter_count() const noexcept {
  const std::array<std::size_t, 4> widths{stars, hidden1, hidden2, classes};
  std::size_t total = stars * dim;
  for (std::size_t l = 0; l < 3; ++l) total += widths[l] * widths[l + 1] + widths[l + 1];
  total += 2 * hidden1 + 2 * hidden2;
  return total;
}

template <typename T>
ModelShape ModelParams<T>::shape() const {
  return ModelShape{constellation.m(), constellation.d(), dense[0].out(), dense[1].out(), dense[2].out()};
}

template <typename T>
std::size_t ModelParams<T>::trainable_parameter_count() const {
  std::size_t total = constellation.parameter_count();
  for (const auto& layer : dense) total += layer.weights.size() + layer.bias.size();
  for (const auto& norm : bn) total += norm.gamma.size() + norm.beta.size();
  return total;
}

template <typename T>
void ModelParams<T>::validate() const {
  require(constellation.m() >= 1 && constellation.d() >= 1, "model: empty constellation");
  require(dense[0].in() == constellation.m(), "model: dense[0].in != star count");
  require(dense[1].in() == dense[0].out() && dense[2].in() == dense[1].out(), "model: dense widths do not chain");
  require(dense[2].out() == class_count, "model: dense[2].out != class_count");
  for (std::size_t l = 0; l < 3; ++l)
    require(dense[l].bias.rows() == 1 && dense[l].bias.cols() == dense[l].out(), "model: bias shape");
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& norm = bn[l];
    const std::size_t w = dense[l].out();
    require(norm.gamma.cols() == w && norm.beta.cols() == w && norm.running_mean.cols() == w &&
                norm.running_var.cols() == w,
            "model: batch-norm width mismatch");
    require(std::all_of(norm.running_var.values().begin(), norm.running_var.values().end(),
                        [](T v) { return v >= T{0}; }),
            "model: negative running variance");
    require(norm.momentum > T{0} && norm.momentum < T{1}, "model: BN momentum must be in (0, 1)");
    require(norm.epsilon > T{0}, "model: BN epsilon must be positive");
  }
  require(dropout_rate >= T{0} && dropout_rate < T{1}, "model: dropout rate must be in [0, 1)");
}

template <typename T>
ModelParams<T> init_model(Rng& rng, const ModelShape& shape, const ModelInit& init) {
  require(shape.classes >= 2, "init_model: need at least two classes");
  require(shape.hidden1 >= 1 && shape.hidden2 >= 1, "init_model: hidden widths must be positive");
  ModelParams<T> p;
  p.constellation = init_constellation<T>(rng, shape.stars, shape.dim, init.measure, static_cast<T>(init.sigma),
                                          static_cast<T>(init.lambda));
  const std::array<std::size_t, 4> widths{shape.stars, shape.hidden1, shape.hidden2, shape.classes};
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const T limit = static_cast<T>(std::sqrt(6.0 / static_cast<double>(in + out)));
    p.dense[l].weights = sample_uniform<T>(rng, -limit, limit, out, in);
    p.dense[l].bias = Matrix<T>(1, out);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t w = widths[l + 1];
    auto& norm = p.bn[l];
    norm.gamma = Matrix<T>(1, w, T{1});
    norm.beta = Matrix<T>(1, w);
    norm.running_mean = Matrix<T>(1, w);
    norm.running_var = Matrix<T>(1, w, T{1});
    norm.momentum = static_cast<T>(init.bn_momentum);
    norm.epsilon = static_cast<T>(init.bn_epsilon);
  }
  p.dropout_rate = static_cast<T>(init.dropout_rate);
  p.class_count = shape.classes;
  p.validate();
  return p;
}

template <typename To, typename From>
ModelParams<To> convert_model(const ModelParams<From>& from) {
  ModelParams<To> to;
  to.constellation.stars = cast<To>(from.constellation.stars);
  to.constellation.measure = from.constellation.measure;
  to.constellation.sigma = static_cast<To>(from.constellation.sigma);
  to.constellation.lambda = static_cast<To>(from.constellation.lambda);
  for (std::size_t l = 0; l < 3; ++l) {
    to.dense[l].weights = cast<To>(from.dense[l].weights);
    to.dense[l].bias = cast<To>(from.dense[l].bias);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    to.bn[l].gamma = cast<To>(from.bn[l].gamma);
    to.bn[l].beta = cast<To>(from.bn[l].beta);
    to.bn[l].running_mean = cast<To>(from.bn[l].running_mean);
    to.bn[l].running_var = cast<To>(from.bn[l].running_var);
    to.bn[l].momentum = static_cast<To>(from.bn[l].momentum);
    to.bn[l].epsilon = static_cast<To>(from.bn[l].epsilon);
  }
  to.dropout_rate = static_cast<To>(from.dropout_rate);
  to.class_count = from.class_count;
  return to;
}

template <typename T>
ModelGrads<T> ModelGrads<T>::zeros_like(const ModelParams<T>& params) {
  ModelGrads g;
  g.stars = Matrix<T>(params.constellation.m(), params.constellation.d());
  for (std::size_t l = 0; l < 3; ++l) {
    g.dense[l].weights = Matrix<T>(params.dense[l].out(), params.dense[l].in());
    g.dense[l].bias = Matrix<T>(1, params.dense[l].out());
  }
  for (std::size_t l = 0; l < 2; ++l) {
    g.bn_gamma[l] = Matrix<T>(1, params.bn[l].width());
    g.bn_beta[l] = Matrix<T>(1, params.bn[l].width());
  }
  return g;
}

template <typename T>
std::vector<ParamBlock<T>> param_blocks(ModelParams<T>& params, ModelGrads<T>& grads) {
  std::vector<ParamBlock<T>> blocks;
  blocks.push_back({"stars", &params.constellation.stars, &grads.stars});
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string prefix = "dense" + std::to_string(l);
    blocks.push_back({prefix + ".weights", &params.dense[l].weights, &grads.dense[l].weights});
    blocks.push_back({prefix + ".bias", &params.dense[l].bias, &grads.dense[l].bias});
    if (l < 2) {
      const std::string bn = "bn" + std::to_string(l);
      blocks.push_back({bn + ".gamma", &params.bn[l].gamma, &grads.bn_gamma[l]});
      blocks.push_back({bn + ".beta", &params.bn[l].beta, &grads.bn_beta[l]});
    }
  }
  return blocks;
}

namespace {

template <typename T>
Matrix<T> affine(const Matrix<T>& x, const DenseLayer<T>& layer) {
  Matrix<T> z = matmul_transpose_b(x, layer.weights);
  for (std::size_t b = 0; b < z.rows(); ++b) {
    auto row = z.row(b);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return z;
}

template <typename T>
Matrix<T> column_sums(const Matrix<T>& x) {
  Matrix<T> s(1, x.cols());
  for (std::size_t b = 0; b < x.rows(); ++b)
    for (std::size_t j = 0; j < x.cols(); ++j) s[j] += x(b, j);
  return s;
}

// ReLU then batch norm, filling the cache slots for block `l`.
template <typename T>
Matrix<T> relu_batchnorm(const Matrix<T>& z, const BatchNormState<T>& norm, Mode mode, HeadCache<T>& c,
                         std::size_t l) {
  const std::size_t batch = z.rows(), w = z.cols();
  Matrix<T> a(batch, w);
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > T{0} ? z[i] : T{0};

  Matrix<T> mean(1, w), var(1, w), inv_std(1, w);
  if (mode == Mode::train) {
    const T inv_b = T{1} / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < w; ++j) mean[j] += a(b, j);
    for (std::size_t j = 0; j < w; ++j) mean[j] *= inv_b;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < w; ++j) {
        const T dv = a(b, j) - mean[j];
        var[j] += dv * dv;
      }
    for (std::size_t j = 0; j < w; ++j) var[j] *= inv_b;
  } else {
    mean = norm.running_mean;
    var = norm.running_var;
  }
  for (std::size_t j = 0; j < w; ++j) inv_std[j] = T{1} / std::sqrt(var[j] + norm.epsilon);

  Matrix<T> xhat(batch, w), y(batch, w);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < w; ++j) {
      xhat(b, j) = (a(b, j) - mean[j]) * inv_std[j];
      y(b, j) = norm.gamma[j] * xhat(b, j) + norm.beta[j];
    }
  c.pre_activation[l] = z;
  c.normalized[l] = std::move(xhat);
  c.inv_std[l] = std::move(inv_std);
  c.batch_mean[l] = std::move(mean);
  c.batch_var[l] = std::move(var);
  c.bn_output[l] = y;
  return y;
}

// Returns ∂loss/∂z for block `l` given ∂loss/∂(BN output).
template <typename T>
Matrix<T> relu_batchnorm_backward(const Matrix<T>& dy, const BatchNormState<T>& norm, const HeadCache<T>& c,
                                  std::size_t l, Matrix<T>& dgamma, Matrix<T>& dbeta) {
  const std::size_t batch = dy.rows(), w = dy.cols();
  const Matrix<T>& xhat = c.normalized[l];
  const Matrix<T>& inv_std = c.inv_std[l];
  dgamma = Matrix<T>(1, w);
  dbeta = Matrix<T>(1, w);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < w; ++j) {
      dgamma[j] += dy(b, j) * xhat(b, j);
      dbeta[j] += dy(b, j);
    }

  Matrix<T> da(batch, w);
  if (c.mode == Mode::train) {
    // dx = inv_std/B · (B·dx̂ - Σdx̂ - x̂·Σ(dx̂·x̂)), with dx̂ = γ·dy
    Matrix<T> sum_dxhat(1, w), sum_dxhat_xhat(1, w);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < w; ++j) {
        const T dxhat = dy(b, j) * norm.gamma[j];
        sum_dxhat[j] += dxhat;
        sum_dxhat_xhat[j] += dxhat * xhat(b, j);
      }
    const T bt = static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < w; ++j) {
        const T dxhat = dy(b, j) * norm.gamma[j];
        da(b, j) = inv_std[j] / bt * (bt * dxhat - sum_dxhat[j] - xhat(b, j) * sum_dxhat_xhat[j]);
      }
  } else {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < w; ++j) da(b, j) = dy(b, j) * norm.gamma[j] * inv_std[j];
  }
  const Matrix<T>& z = c.pre_activation[l];
  for (std::size_t i = 0; i < da.size(); ++i)
    if (!(z[i] > T{0})) da[i] = T{0};
  return da;
}

}  // namespace

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows(), logits.cols());
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto z = logits.row(b);
    const T hi = *std::max_element(z.begin(), z.end());
    T total{0};
    auto out = p.row(b);
    for (std::size_t j = 0; j < z.size(); ++j) {
      out[j] = std::exp(z[j] - hi);
      total += out[j];
    }
    for (auto& v : out) v /= total;
  }
  return p;
}

namespace {

template <typename T>
void fill_dropout_scale(std::span<T> scale, T rate, Rng& rng) {
  if (rate == T{0}) {
    std::fill(scale.begin(), scale.end(), T{1});
    return;
  }
  const T keep_scale = T{1} / (T{1} - rate);
  for (auto& s : scale) s = rng.uniform01() < static_cast<double>(rate) ? T{0} : keep_scale;
}

}  // namespace

template <typename T>
std::vector<T> dropout(std::span<const T> x, T rate, Mode mode, Rng& rng) {
  require(rate >= T{0} && rate < T{1}, "dropout: rate must be in [0, 1)");
  std::vector<T> out(x.begin(), x.end());
  if (mode == Mode::eval) return out;
  std::vector<T> scale(x.size());
  fill_dropout_scale<T>(scale, rate, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale[i];
  return out;
}

template <typename T>
Matrix<T> head_forward(const ModelParams<T>& params, const Matrix<T>& features, Mode mode, Rng& rng,
                       HeadCache<T>* cache) {
  require(features.cols() == params.dense[0].in(), "head_forward: feature width != dense[0].in");
  require(features.rows() >= 1, "head_forward: empty batch");
  HeadCache<T> local;
  HeadCache<T>& c = cache ? *cache : local;
  c.mode = mode;
  c.input = features;

  Matrix<T> h = relu_batchnorm(affine(features, params.dense[0]), params.bn[0], mode, c, 0);
  h = relu_batchnorm(affine(h, params.dense[1]), params.bn[1], mode, c, 1);
  if (mode == Mode::train) {
    c.dropout_scale = Matrix<T>(h.rows(), h.cols());
    fill_dropout_scale<T>(c.dropout_scale.values(), params.dropout_rate, rng);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= c.dropout_scale[i];
  } else {
    c.dropout_scale = Matrix<T>();
  }
  c.dropped = h;
  c.logits = affine(h, params.dense[2]);
  c.probs = softmax_rows(c.logits);
  c.valid = true;
  return c.probs;
}

template <typename T>
void update_running_stats(ModelParams<T>& params, const HeadCache<T>& cache) {
  require(cache.valid && cache.mode == Mode::train, "update_running_stats: needs a train-mode cache");
  for (std::size_t l = 0; l < 2; ++l) {
    auto& norm = params.bn[l];
    const T mom = norm.momentum;
    for (std::size_t j = 0; j < norm.width(); ++j) {
      norm.running_mean[j] = mom * norm.running_mean[j] + (T{1} - mom) * cache.batch_mean[l][j];
      norm.running_var[j] = mom * norm.running_var[j] + (T{1} - mom) * cache.batch_var[l][j];
    }
  }
}

template <typename T>
HeadGrads<T> head_backward_from_logits(const ModelParams<T>& params, const HeadCache<T>& cache,
                                       const Matrix<T>& grad_logits) {
  require(cache.valid, "head_backward: no forward cache");
  require(grad_logits.rows() == cache.logits.rows() && grad_logits.cols() == cache.logits.cols(),
          "head_backward: gradient shape does not match cached forward pass");
  require(cache.input.cols() == params.dense[0].in(), "head_backward: cache from a different model");
  HeadGrads<T> g;

  g.dense[2].weights = matmul_transpose_a(grad_logits, cache.dropped);
  g.dense[2].bias = column_sums(grad_logits);
  Matrix<T> d = matmul(grad_logits, params.dense[2].weights);
  if (cache.mode == Mode::train)
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= cache.dropout_scale[i];

  Matrix<T> dz1 = relu_batchnorm_backward(d, params.bn[1], cache, 1, g.bn_gamma[1], g.bn_beta[1]);
  g.dense[1].weights = matmul_transpose_a(dz1, cache.bn_output[0]);
  g.dense[1].bias = column_sums(dz1);
  d = matmul(dz1, params.dense[1].weights);

  Matrix<T> dz0 = relu_batchnorm_backward(d, params.bn[0], cache, 0, g.bn_gamma[0], g.bn_beta[0]);
  g.dense[0].weights = matmul_transpose_a(dz0, cache.input);
  g.dense[0].bias = column_sums(dz0);
  g.features = matmul(dz0, params.dense[0].weights);
  return g;
}

template <typename T>
HeadGrads<T> head_backward(const ModelParams<T>& params, const HeadCache<T>& cache, const Matrix<T>& grad_probs) {
  require(cache.valid, "head_backward: no forward cache");
  require(grad_probs.same_shape(cache.probs), "head_backward: gradient shape does not match cached probabilities");
  // Softmax JVP: ∂L/∂zⱼ = pⱼ (gⱼ - Σₖ gₖ pₖ)
  Matrix<T> grad_logits(grad_probs.rows(), grad_probs.cols());
  for (std::size_t b = 0; b < grad_probs.rows(); ++b) {
    T dot{0};
    for (std::size_t j = 0; j < grad_probs.cols(); ++j) dot += grad_probs(b, j) * cache.probs(b, j);
    for (std::size_t j = 0; j < grad_probs.cols(); ++j)
      grad_logits(b, j) = cache.probs(b, j) * (grad_probs(b, j) - dot);
  }
  return head_backward_from_logits(params, cache, grad_logits);
}

#define URSA_INSTANTIATE(T)                                                                      \
  template struct ModelParams<T>;                                                                \
  template struct ModelGrads<T>;                                                                 \
  template ModelParams<T> init_model(Rng&, const ModelShape&, const ModelInit&);                 \
  template std::vector<ParamBlock<T>> param_blocks(ModelParams<T>&, ModelGrads<T>&);             \
  template Matrix<T> softmax_rows(const Matrix<T>&);                                             \
  template std::vector<T> dropout(std::span<const T>, T, Mode, Rng&);                            \
  template Matrix<T> head_forward(const ModelParams<T>&, const Matrix<T>&, Mode, Rng&, HeadCache<T>*); \
  template void update_running_stats(ModelParams<T>&, const HeadCache<T>&);                      \
  template HeadGrads<T> head_backward(const ModelParams<T>&, const HeadCache<T>&, const Matrix<T>&); \
  template HeadGrads<T> head_backward_from_logits(const ModelParams<T>&, const HeadCache<T>&, const Matrix<T>&);

URSA_INSTANTIATE(float)
URSA_INSTANTIATE(double)

#undef URSA_INSTANTIATE

template ModelParams<float> convert_model(const ModelParams<double>&);
template ModelParams<double> convert_model(const ModelParams<float>&);
template ModelParams<float> convert_model(const ModelParams<float>&);
template ModelParams<double> convert_model(const ModelParams<double>&);

}  // namespace ursa
