#pragma once

// Model checkpoints, constellation snapshots and the model summary.
//
// Checkpoint (little-endian, format version 1):
//   char[8]  "URSACKPT"
//   u8       format version
//   u8       precision the model was trained in (0 = f32, 1 = f64)
//   u8       measure (0 = gaussian, 1 = exponential, 2 = minimum)
//   u8       reserved (0)
//   u32 × 5  stars m, dim d, hidden1, hidden2, classes
//   f64 × 7  sigma, lambda, dropout, bn0 momentum, bn0 epsilon, bn1 momentum, bn1 epsilon
//   u32      length L of the training configuration text, then L bytes (key=value lines)
//   f64 ...  tensors, row-major, in this order:
//              stars (m×d)
//              dense0 weights (h1×m), dense0 bias (h1)
//              bn0 gamma, beta, running_mean, running_var (h1 each)
//              dense1 weights (h2×h1), dense1 bias (h2)
//              bn1 gamma, beta, running_mean, running_var (h2 each)
//              dense2 weights (k×h2), dense2 bias (k)
//
// Snapshot CSV: header "epoch,star_index,x0,...,x{d-1}", one row per star.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ursa/head.hpp"
#include "ursa/training.hpp"

namespace ursa {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<double> model;  // f32-trained values widen exactly
  TrainConfig config;
  Precision precision = Precision::f32;
};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<T>& model, const TrainConfig& config);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& model, const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_snapshot_csv(std::ostream& out, std::size_t epoch, const Matrix<double>& stars);
void save_snapshot_csv(const std::filesystem::path& path, std::size_t epoch, const Matrix<double>& stars);

struct Snapshot {
  std::size_t epoch = 0;
  Matrix<double> stars;
};
Snapshot load_snapshot_csv(const std::filesystem::path& path);  // throws DataError

// "constellation_epoch_0010.csv"
std::filesystem::path snapshot_file_name(std::size_t epoch);

// Mean Euclidean distance between matching stars.
double mean_star_displacement(const Matrix<double>& from, const Matrix<double>& to);

// Per-layer parameter table, counted from the model's tensors, ending in
// "total trainable parameters: N".
template <typename T>
void write_model_summary(std::ostream& out, const ModelParams<T>& model);

}  // namespace ursa
