#include "ursa/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "ursa/error.hpp"
#include "ursa/training.hpp"

namespace ursa {

void GradCheckReport::print(std::ostream& out) const {
  const auto flags = out.flags();
  for (const auto& b : blocks) {
    out << "  " << std::left << std::setw(14) << b.name << std::right << " checked=" << std::setw(5) << b.checked
        << " excluded=" << std::setw(3) << b.excluded << " max_rel_err=" << std::scientific << std::setprecision(3)
        << b.max_rel_error << std::defaultfloat << (b.passed ? "  ok" : "  FAIL") << '\n';
  }
  out.flags(flags);
}

std::vector<bool> singular_stars(const Constellation<double>& constellation,
                                 std::span<const PointCloud<double>> clouds, double tie_gap) {
  std::vector<bool> flagged(constellation.m(), false);
  if (constellation.measure == Measure::gaussian) return flagged;
  for (const auto& cloud : clouds) {
    require(cloud.d() == constellation.d(), "singular_stars: dimension mismatch");
    for (std::size_t i = 0; i < constellation.m(); ++i) {
      double best = std::numeric_limits<double>::infinity(), second = best;
      for (std::size_t j = 0; j < cloud.n(); ++j) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < cloud.d(); ++k) {
          const double diff = cloud.points()(j, k) - constellation.stars(i, k);
          r2 += diff * diff;
        }
        const double r = std::sqrt(r2);
        if (r < best) {
          second = best;
          best = r;
        } else if (r < second) {
          second = r;
        }
      }
      if (best < tie_gap) flagged[i] = true;
      if (constellation.measure == Measure::minimum && second - best < tie_gap) flagged[i] = true;
    }
  }
  return flagged;
}

GradCheckReport gradient_check(const ModelParams<double>& model, std::span<const PointCloud<double>> clouds,
                               std::span<const std::size_t> labels, const GradCheckOptions& options) {
  model.validate();
  require(options.step > 0.0 && options.tolerance > 0.0 && options.scale_floor > 0.0,
          "gradient_check: step, tolerance and scale floor must be positive");

  Rng analytic_rng(options.dropout_seed);
  BatchResult<double> analytic = batch_gradients<double>(model, clouds, labels, analytic_rng);

  const std::vector<bool> flagged = singular_stars(model.constellation, clouds, options.tie_gap);

  ModelParams<double> probe = model;
  ModelGrads<double> grads = analytic.grads;
  GradCheckReport report;
  for (auto& block : param_blocks(probe, grads)) {
    BlockCheck check;
    check.name = block.name;
    const bool is_stars = block.name == "stars";
    double max_diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < block.value->size(); ++i) {
      if (is_stars && flagged[i / model.constellation.d()]) {
        ++check.excluded;
        continue;
      }
      double& x = (*block.value)[i];
      const double saved = x;
      x = saved + options.step;
      Rng plus_rng(options.dropout_seed);
      const double loss_plus = batch_loss<double>(probe, clouds, labels, Mode::train, plus_rng);
      x = saved - options.step;
      Rng minus_rng(options.dropout_seed);
      const double loss_minus = batch_loss<double>(probe, clouds, labels, Mode::train, minus_rng);
      x = saved;

      const double numeric = (loss_plus - loss_minus) / (2.0 * options.step);
      const double exact = (*block.grad)[i];
      max_diff = std::max(max_diff, std::abs(exact - numeric));
      scale = std::max({scale, std::abs(exact), std::abs(numeric)});
      ++check.checked;
    }
    check.max_rel_error = max_diff / std::max(scale, options.scale_floor);
    check.passed = check.max_rel_error <= options.tolerance;
    report.excluded += check.excluded;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.passed = report.passed && check.passed;
    report.blocks.push_back(check);
  }
  return report;
}

bool is_well_conditioned(const GradCheckInstance& instance, double kink_gap, double min_variance) {
  Rng rng(GradCheckOptions{}.dropout_seed);
  const auto result = batch_gradients<double>(instance.model, instance.clouds, instance.labels, rng);
  for (std::size_t l = 0; l < 2; ++l) {
    const Matrix<double>& z = result.cache.pre_activation[l];
    for (double v : z.values())
      if (std::abs(v) < kink_gap) return false;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      bool live = false;
      for (std::size_t b = 0; b < z.rows(); ++b) live = live || z(b, c) > 0.0;
      if (live && result.cache.batch_var[l](0, c) < min_variance) return false;
    }
  }
  return true;
}

GradCheckInstance make_random_instance(std::uint64_t seed, const InstanceSpec& spec) {
  Rng rng(seed);
  ModelInit init;
  init.measure = spec.measure;
  init.sigma = spec.sigma;
  init.lambda = spec.lambda;
  init.dropout_rate = spec.dropout_rate;
  constexpr std::size_t max_draws = 10000;
  for (std::size_t draw = 0; draw < max_draws; ++draw) {
    GradCheckInstance inst;
    inst.rejected_draws = draw;
    inst.model = init_model<double>(
        rng, ModelShape{spec.stars, spec.dim, spec.hidden1, spec.hidden2, spec.classes}, init);
    for (std::size_t l = 0; l < 3; ++l)
      for (double& b : inst.model.dense[l].bias.values()) b = rng.uniform(-0.5, 0.5);
    for (std::size_t l = 0; l < 2; ++l) {
      for (double& g : inst.model.bn[l].gamma.values()) g = rng.uniform(0.5, 1.5);
      for (double& b : inst.model.bn[l].beta.values()) b = rng.uniform(-0.5, 0.5);
    }
    for (std::size_t b = 0; b < spec.batch; ++b) {
      inst.clouds.emplace_back(sample_uniform<double>(rng, -1.0, 1.0, spec.points, spec.dim));
      inst.labels.push_back(static_cast<std::size_t>(rng.uniform_index(spec.classes)));
    }
    if (is_well_conditioned(inst)) return inst;
  }
  throw ContractViolation("make_random_instance: no well-conditioned instance in " + std::to_string(max_draws) +
                          " draws");
}

}  // namespace ursa
