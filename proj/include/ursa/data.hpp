#pragma once

// Dataset ingestion: MNIST IDX files, the image → point-cloud conversion, and
// the URSA cloud archive.
//
// IDX (big-endian):
//   images: u32 magic 0x00000803, u32 count, u32 rows, u32 cols, count·rows·cols u8 pixels
//   labels: u32 magic 0x00000801, u32 count, count u8 labels (0-9)
//
// URSA cloud archive (little-endian), see docs/formats.md:
//   char[4] "URSA", u32 version (1), u32 set_count, u32 n, u32 d, u32 class_count
//   per sample: d×n f32 coordinates (all of axis 0, then axis 1, ...), u16 label

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ursa/rng.hpp"
#include "ursa/ursa_layer.hpp"

namespace ursa {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kMnistSide = 28;
inline constexpr std::size_t kMnistCloudPoints = 312;
inline constexpr std::uint8_t kBrightThreshold = 128;  // pixels strictly above are kept

struct ImageSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count·rows·cols, row-major per image
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * rows * cols, rows * cols};
  }
};

// Returns pixels and sets rows/cols.
std::vector<std::uint8_t> parse_idx_images(std::span<const std::uint8_t> bytes, std::size_t& count,
                                           std::size_t& rows, std::size_t& cols);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

// Loads and cross-checks an image file and its label file. Errors name the
// offending file.
ImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Pixel (row r, col c) of a 28×28 image maps to (c/13.5 - 1, 1 - r/13.5).
std::array<float, 2> pixel_to_plane(std::size_t row, std::size_t col);

// Coordinates of every pixel > 128 in scan order, then padded to
// `target_points` by repeating bright points drawn uniformly with
// replacement.
PointCloud<float> image_to_cloud(std::span<const std::uint8_t> image, Rng& rng,
                                 std::size_t target_points = kMnistCloudPoints);

std::size_t count_bright_pixels(std::span<const std::uint8_t> image);

enum class Split { train, test };

// Fixed-size labeled clouds stored contiguously, point-major (n×d per cloud).
struct LabeledCloudSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t class_count = 0;
  Split split = Split::train;
  std::vector<float> coords;
  std::vector<std::uint16_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const float> cloud_data(std::size_t i) const { return {coords.data() + i * n * d, n * d}; }

  template <typename T>
  PointCloud<T> cloud(std::size_t i) const {
    const auto src = cloud_data(i);
    std::vector<T> pts(src.begin(), src.end());
    return PointCloud<T>(Matrix<T>(n, d, std::move(pts)));
  }

  void push_back(const PointCloud<float>& cloud, std::uint16_t label);
  LabeledCloudSet subset(std::span<const std::size_t> indices) const;
  LabeledCloudSet head(std::size_t count) const;
  void validate() const;  // throws ValidationError
};

// MNIST images → n = 312, d = 2, 10-class set.
LabeledCloudSet images_to_clouds(const ImageSet& images, Rng& rng, Split split = Split::train);

struct ArchiveContents {
  LabeledCloudSet set;
  std::size_t clouds_outside_unit_sphere = 0;  // max norm > 1 + 1e-3
};

std::vector<std::uint8_t> encode_cloud_archive(const LabeledCloudSet& set);
ArchiveContents decode_cloud_archive(std::span<const std::uint8_t> bytes);

void save_cloud_archive(const std::filesystem::path& path, const LabeledCloudSet& set);
ArchiveContents load_cloud_archive(const std::filesystem::path& path, Split split = Split::train);

// Synthetic labeled clouds for smoke tests. Each class owns `anchors` centres
// drawn in [-0.6, 0.6]^d; every point picks one centre and adds N(0, spread²)
// noise. Clouds are scaled into the unit sphere when they leave it. Labels
// cycle 0, 1, ..., classes-1.
struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t points = 64;
  std::size_t dim = 2;
  std::size_t count = 100;
  std::size_t anchors = 1;
  double spread = 0.1;
  std::uint64_t seed = 1;
};

LabeledCloudSet make_synthetic_set(const SyntheticSpec& spec);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);  // throws DataError
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ursa
