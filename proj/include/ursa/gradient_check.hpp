#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ursa/head.hpp"
#include "ursa/ursa_layer.hpp"

namespace ursa {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference step
  double tolerance = 1e-4;  // max relative error per block
  // Star coordinates are excluded when a point lies within tie_gap of the
  // star (exponential, minimum) or the two nearest points differ in distance
  // by less than tie_gap (minimum).
  double tie_gap = 1e-6;
  // Lower bound on a block's gradient scale. Blocks whose gradient is
  // structurally near zero (a bias feeding batch norm) are then compared in
  // absolute terms instead of amplifying central-difference roundoff.
  double scale_floor = 1e-5;
  std::uint64_t dropout_seed = 0x5eed;
};

struct BlockCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  // max |analytic - numeric| over the block divided by the block's largest
  // gradient magnitude (analytic or numeric), floored at scale_floor.
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
  bool passed = true;

  void print(std::ostream& out) const;
};

// Compares batch_gradients on a train-mode minibatch against central
// differences of batch_loss, with the dropout mask pinned by
// options.dropout_seed.
GradCheckReport gradient_check(const ModelParams<double>& model, std::span<const PointCloud<double>> clouds,
                               std::span<const std::size_t> labels, const GradCheckOptions& options = {});

// Stars whose coordinates sit on a kink of the chosen measure (see
// GradCheckOptions::tie_gap).
std::vector<bool> singular_stars(const Constellation<double>& constellation,
                                 std::span<const PointCloud<double>> clouds, double tie_gap);

struct GradCheckInstance {
  ModelParams<double> model;
  std::vector<PointCloud<double>> clouds;
  std::vector<std::size_t> labels;
  std::size_t rejected_draws = 0;  // ill-conditioned candidates discarded
};

struct InstanceSpec {
  Measure measure = Measure::gaussian;
  std::size_t points = 8;
  std::size_t stars = 4;
  std::size_t dim = 2;
  std::size_t hidden1 = 5;
  std::size_t hidden2 = 4;
  std::size_t classes = 3;
  std::size_t batch = 3;
  double sigma = 0.5;
  double lambda = 2.0;
  double dropout_rate = 0.3;
};

// True when the train-mode batch keeps every ReLU pre-activation at least
// `kink_gap` away from zero and every live BN channel (some sample above
// zero) has batch variance of at least `min_variance`. Central differences
// are unreliable otherwise.
bool is_well_conditioned(const GradCheckInstance& instance, double kink_gap = 1e-3, double min_variance = 1e-3);

// Random small model and batch; points uniform in [-1, 1]^d. BN affine
// parameters and biases are perturbed away from their initial values so
// every gradient block is exercised. Candidates failing is_well_conditioned
// are redrawn from the same stream.
GradCheckInstance make_random_instance(std::uint64_t seed, const InstanceSpec& spec);

}  // namespace ursa
