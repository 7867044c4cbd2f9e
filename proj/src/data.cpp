#include "ursa/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "ursa/error.hpp"

namespace ursa {

namespace {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t count, const char* what) const {
    if (remaining() < count)
      throw ParseError(std::string("truncated input: expected ") + what + ", " + std::to_string(count) +
                           " bytes needed but " + std::to_string(remaining()) + " left",
                       pos_);
  }

  std::uint32_t u32_be(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::uint32_t u32_le(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::uint16_t u16_le(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  float f32_le(const char* what) { return std::bit_cast<float>(u32_le(what)); }

  std::span<const std::uint8_t> take(std::size_t count, const char* what) {
    need(count, what);
    auto out = bytes_.subspan(pos_, count);
    pos_ += count;
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16_le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError(std::string(what) + " does not fit the archive header");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("error reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("error writing '" + path.string() + "'");
}

std::vector<std::uint8_t> parse_idx_images(std::span<const std::uint8_t> bytes, std::size_t& count,
                                           std::size_t& rows, std::size_t& cols) {
  ByteReader r(bytes);
  const std::uint32_t magic = r.u32_be("magic number");
  if (magic != kIdxImageMagic) throw ParseError("bad IDX image magic number", 0);
  count = r.u32_be("image count");
  rows = r.u32_be("row count");
  cols = r.u32_be("column count");
  const std::uint64_t payload = static_cast<std::uint64_t>(count) * rows * cols;
  if (payload > r.remaining())
    throw ParseError("truncated IDX image payload: header promises " + std::to_string(payload) + " bytes, " +
                         std::to_string(r.remaining()) + " present",
                     r.offset() + r.remaining());
  if (payload < r.remaining()) throw ParseError("trailing bytes after IDX image payload", r.offset() + payload);
  const auto pixels = r.take(static_cast<std::size_t>(payload), "pixels");
  return {pixels.begin(), pixels.end()};
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::uint32_t magic = r.u32_be("magic number");
  if (magic != kIdxLabelMagic) throw ParseError("bad IDX label magic number", 0);
  const std::uint32_t count = r.u32_be("label count");
  if (count > r.remaining())
    throw ParseError("truncated IDX label payload: header promises " + std::to_string(count) + " labels, " +
                         std::to_string(r.remaining()) + " present",
                     r.offset() + r.remaining());
  if (count < r.remaining()) throw ParseError("trailing bytes after IDX label payload", r.offset() + count);
  const std::size_t start = r.offset();
  const auto labels = r.take(count, "labels");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 9)
      throw ValidationError("label " + std::to_string(labels[i]) + " out of range 0-9 at byte offset " +
                            std::to_string(start + i));
  return {labels.begin(), labels.end()};
}

ImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  ImageSet set;
  std::size_t count = 0;
  auto with_context = [](const std::filesystem::path& path, auto&& fn) {
    try {
      return fn();
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.reason(), e.offset());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  };
  set.pixels = with_context(images_path, [&] {
    return parse_idx_images(read_file_bytes(images_path), count, set.rows, set.cols);
  });
  set.labels = with_context(labels_path, [&] { return parse_idx_labels(read_file_bytes(labels_path)); });
  if (set.labels.size() != count)
    throw ValidationError(images_path.string() + " holds " + std::to_string(count) + " images but " +
                          labels_path.string() + " holds " + std::to_string(set.labels.size()) + " labels");
  return set;
}

std::array<float, 2> pixel_to_plane(std::size_t row, std::size_t col) {
  constexpr double half = (kMnistSide - 1) / 2.0;  // 13.5
  return {static_cast<float>(static_cast<double>(col) / half - 1.0),
          static_cast<float>(1.0 - static_cast<double>(row) / half)};
}

std::size_t count_bright_pixels(std::span<const std::uint8_t> image) {
  std::size_t count = 0;
  for (auto v : image) count += v > kBrightThreshold;
  return count;
}

PointCloud<float> image_to_cloud(std::span<const std::uint8_t> image, Rng& rng, std::size_t target_points) {
  require(image.size() == kMnistSide * kMnistSide, "image_to_cloud: image must be 28x28");
  require(target_points >= 1, "image_to_cloud: target point count must be positive");
  std::vector<float> pts;
  pts.reserve(target_points * 2);
  for (std::size_t r = 0; r < kMnistSide; ++r)
    for (std::size_t c = 0; c < kMnistSide; ++c)
      if (image[r * kMnistSide + c] > kBrightThreshold) {
        const auto xy = pixel_to_plane(r, c);
        pts.push_back(xy[0]);
        pts.push_back(xy[1]);
      }
  const std::size_t bright = pts.size() / 2;
  if (bright == 0) throw ValidationError("image has no pixels above 128; nothing to convert");
  if (bright > target_points)
    throw ValidationError("image has " + std::to_string(bright) + " bright pixels, more than the " +
                          std::to_string(target_points) + "-point cloud size");
  while (pts.size() < target_points * 2) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(bright));
    const float x = pts[2 * j], y = pts[2 * j + 1];
    pts.push_back(x);
    pts.push_back(y);
  }
  return PointCloud<float>(Matrix<float>(target_points, 2, std::move(pts)));
}

void LabeledCloudSet::push_back(const PointCloud<float>& cloud, std::uint16_t label) {
  if (labels.empty() && coords.empty() && n == 0) {
    n = cloud.n();
    d = cloud.d();
  }
  require(cloud.n() == n && cloud.d() == d, "LabeledCloudSet: cloud shape differs from the set");
  const auto v = cloud.points().values();
  coords.insert(coords.end(), v.begin(), v.end());
  labels.push_back(label);
}

LabeledCloudSet LabeledCloudSet::subset(std::span<const std::size_t> indices) const {
  LabeledCloudSet out;
  out.n = n;
  out.d = d;
  out.class_count = class_count;
  out.split = split;
  out.coords.reserve(indices.size() * n * d);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    require(i < size(), "LabeledCloudSet::subset: index out of range");
    const auto src = cloud_data(i);
    out.coords.insert(out.coords.end(), src.begin(), src.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

LabeledCloudSet LabeledCloudSet::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

void LabeledCloudSet::validate() const {
  if (labels.empty()) throw ValidationError("cloud set is empty");
  if (n == 0 || d == 0) throw ValidationError("cloud set has zero points or zero dimensions");
  if (class_count == 0) throw ValidationError("cloud set has zero classes");
  if (coords.size() != labels.size() * n * d) throw ValidationError("cloud set coordinate count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= class_count)
      throw ValidationError("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                            " >= class count " + std::to_string(class_count));
  for (float v : coords)
    if (!std::isfinite(v)) throw ValidationError("cloud set contains non-finite coordinates");
}

LabeledCloudSet images_to_clouds(const ImageSet& images, Rng& rng, Split split) {
  require(images.rows == kMnistSide && images.cols == kMnistSide, "images_to_clouds: expected 28x28 images");
  LabeledCloudSet set;
  set.n = kMnistCloudPoints;
  set.d = 2;
  set.class_count = 10;
  set.split = split;
  set.coords.reserve(images.size() * set.n * set.d);
  set.labels.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      set.push_back(image_to_cloud(images.image(i), rng), images.labels[i]);
    } catch (const ValidationError& e) {
      throw ValidationError("image " + std::to_string(i) + ": " + e.what());
    }
  }
  return set;
}

std::vector<std::uint8_t> encode_cloud_archive(const LabeledCloudSet& set) {
  set.validate();
  std::vector<std::uint8_t> out;
  out.reserve(24 + set.size() * (set.n * set.d * 4 + 2));
  for (char c : std::string_view("URSA")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32_le(out, kArchiveVersion);
  put_u32_le(out, narrow_u32(set.size(), "set_count"));
  put_u32_le(out, narrow_u32(set.n, "n"));
  put_u32_le(out, narrow_u32(set.d, "d"));
  put_u32_le(out, narrow_u32(set.class_count, "class_count"));
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto cloud = set.cloud_data(s);
    for (std::size_t k = 0; k < set.d; ++k)
      for (std::size_t j = 0; j < set.n; ++j) put_u32_le(out, std::bit_cast<std::uint32_t>(cloud[j * set.d + k]));
    put_u16_le(out, set.labels[s]);
  }
  return out;
}

ArchiveContents decode_cloud_archive(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "URSA", 4) != 0) throw ParseError("bad cloud-archive magic (expected \"URSA\")", 0);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32_le("version");
  if (version != kArchiveVersion)
    throw ParseError("unsupported cloud-archive version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32_le("set_count");
  const std::uint32_t n = r.u32_le("n");
  const std::uint32_t d = r.u32_le("d");
  const std::uint32_t classes = r.u32_le("class_count");
  if (count == 0) throw ValidationError("cloud archive holds zero samples");
  if (n == 0 || d == 0) throw ValidationError("cloud archive advertises n = 0 or d = 0");
  if (classes == 0) throw ValidationError("cloud archive advertises zero classes");
  if (classes > 65536) throw ParseError("class_count exceeds the 16-bit label range", 20);

  const std::uint64_t record = static_cast<std::uint64_t>(n) * d * 4 + 2;
  const std::uint64_t payload = record * count;
  if (payload > r.remaining())
    throw ParseError("truncated cloud archive: header promises " + std::to_string(count) + " samples of n=" +
                         std::to_string(n) + ", d=" + std::to_string(d) + " (" + std::to_string(payload) +
                         " bytes) but " + std::to_string(r.remaining()) + " bytes follow",
                     bytes.size());
  if (payload < r.remaining()) throw ParseError("trailing bytes after cloud-archive payload", r.offset() + payload);

  ArchiveContents result;
  LabeledCloudSet& set = result.set;
  set.n = n;
  set.d = d;
  set.class_count = classes;
  set.coords.assign(static_cast<std::size_t>(count) * n * d, 0.0f);
  set.labels.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    float* cloud = set.coords.data() + s * n * d;
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t at = r.offset();
        const float v = r.f32_le("coordinate");
        if (!std::isfinite(v)) throw ParseError("non-finite coordinate", at);
        cloud[j * d + k] = v;
      }
    const std::size_t at = r.offset();
    const std::uint16_t label = r.u16_le("label");
    if (label >= classes)
      throw ParseError("label " + std::to_string(label) + " >= class_count " + std::to_string(classes), at);
    set.labels[s] = label;

    double max_norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double norm2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) norm2 += static_cast<double>(cloud[j * d + k]) * cloud[j * d + k];
      max_norm2 = std::max(max_norm2, norm2);
    }
    if (std::sqrt(max_norm2) > 1.0 + 1e-3) ++result.clouds_outside_unit_sphere;
  }
  return result;
}

LabeledCloudSet make_synthetic_set(const SyntheticSpec& spec) {
  require(spec.classes >= 1 && spec.points >= 1 && spec.dim >= 1 && spec.count >= 1 && spec.anchors >= 1,
          "make_synthetic_set: all sizes must be positive");
  require(spec.spread > 0.0, "make_synthetic_set: spread must be positive");
  Rng rng(spec.seed);
  std::vector<Matrix<double>> anchors;
  for (std::size_t c = 0; c < spec.classes; ++c)
    anchors.push_back(sample_uniform<double>(rng, -0.6, 0.6, spec.anchors, spec.dim));

  LabeledCloudSet set;
  set.n = spec.points;
  set.d = spec.dim;
  set.class_count = spec.classes;
  set.coords.reserve(spec.count * spec.points * spec.dim);
  std::vector<double> cloud(spec.points * spec.dim);
  for (std::size_t s = 0; s < spec.count; ++s) {
    const std::size_t label = s % spec.classes;
    double max_norm2 = 0.0;
    for (std::size_t j = 0; j < spec.points; ++j) {
      const auto a = static_cast<std::size_t>(rng.uniform_index(spec.anchors));
      double norm2 = 0.0;
      for (std::size_t k = 0; k < spec.dim; ++k) {
        const double v = anchors[label](a, k) + spec.spread * rng.normal();
        cloud[j * spec.dim + k] = v;
        norm2 += v * v;
      }
      max_norm2 = std::max(max_norm2, norm2);
    }
    const double shrink = max_norm2 > 1.0 ? 1.0 / std::sqrt(max_norm2) : 1.0;
    for (double v : cloud) set.coords.push_back(static_cast<float>(v * shrink));
    set.labels.push_back(static_cast<std::uint16_t>(label));
  }
  return set;
}

void save_cloud_archive(const std::filesystem::path& path, const LabeledCloudSet& set) {
  write_file_bytes(path, encode_cloud_archive(set));
}

ArchiveContents load_cloud_archive(const std::filesystem::path& path, Split split) {
  try {
    auto contents = decode_cloud_archive(read_file_bytes(path));
    contents.set.split = split;
    return contents;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.offset());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace ursa
