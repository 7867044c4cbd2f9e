#include "ursa/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "ursa/config.hpp"
#include "ursa/data.hpp"
#include "ursa/error.hpp"

namespace ursa {

namespace {

constexpr char kCheckpointMagic[8] = {'U', 'R', 'S', 'A', 'C', 'K', 'P', 'T'};

struct Writer {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  template <typename T>
  void tensor(const Matrix<T>& m) {
    for (T v : m.values()) f64(static_cast<double>(v));
  }
};

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) throw ParseError(std::string("truncated checkpoint while reading ") + what, pos);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[pos++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[pos + i];
    pos += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[pos + i];
    pos += 8;
    const double d = std::bit_cast<double>(v);
    if (!std::isfinite(d)) throw ParseError(std::string("non-finite value in ") + what, pos - 8);
    return d;
  }
  Matrix<double> tensor(std::size_t rows, std::size_t cols, const char* what) {
    Matrix<double> m(rows, cols);
    for (double& v : m.values()) v = f64(what);
    return m;
  }
};

std::uint8_t measure_code(Measure m) {
  switch (m) {
    case Measure::gaussian: return 0;
    case Measure::exponential: return 1;
    case Measure::minimum: return 2;
  }
  return 0;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<T>& model, const TrainConfig& config) {
  model.validate();
  const ModelShape shape = model.shape();
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  w.u8(kCheckpointVersion);
  w.u8(std::is_same_v<T, float> ? 0 : 1);
  w.u8(measure_code(model.constellation.measure));
  w.u8(0);
  for (std::size_t v : {shape.stars, shape.dim, shape.hidden1, shape.hidden2, shape.classes})
    w.u32(static_cast<std::uint32_t>(v));
  w.f64(static_cast<double>(model.constellation.sigma));
  w.f64(static_cast<double>(model.constellation.lambda));
  w.f64(static_cast<double>(model.dropout_rate));
  for (const auto& norm : model.bn) {
    w.f64(static_cast<double>(norm.momentum));
    w.f64(static_cast<double>(norm.epsilon));
  }
  const std::string text = to_config_text(config);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes.insert(w.bytes.end(), text.begin(), text.end());

  w.tensor(model.constellation.stars);
  for (std::size_t l = 0; l < 3; ++l) {
    w.tensor(model.dense[l].weights);
    w.tensor(model.dense[l].bias);
    if (l < 2) {
      w.tensor(model.bn[l].gamma);
      w.tensor(model.bn[l].beta);
      w.tensor(model.bn[l].running_mean);
      w.tensor(model.bn[l].running_var);
    }
  }
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  r.need(8, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw ParseError("not an Ursa checkpoint (bad magic)", 0);
  r.pos = 8;
  const auto version = r.u8("format version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), r.pos - 1);
  const auto precision = r.u8("precision");
  if (precision > 1) throw ParseError("bad precision code", r.pos - 1);
  const auto measure = r.u8("measure");
  if (measure > 2) throw ParseError("bad measure code", r.pos - 1);
  r.u8("reserved");

  ModelShape shape;
  shape.stars = r.u32("stars");
  shape.dim = r.u32("dim");
  shape.hidden1 = r.u32("hidden1");
  shape.hidden2 = r.u32("hidden2");
  shape.classes = r.u32("classes");
  if (shape.stars == 0 || shape.dim == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 || shape.classes < 2)
    throw ParseError("checkpoint header has a zero dimension", 12);
  const std::uint64_t tensor_values = shape.trainable_parameter_count() + 2ull * (shape.hidden1 + shape.hidden2);
  if (tensor_values * 8 > bytes.size()) throw ParseError("checkpoint shorter than its dimension header implies", bytes.size());

  Checkpoint ck;
  ck.precision = precision == 0 ? Precision::f32 : Precision::f64;
  auto& m = ck.model;
  m.constellation.measure = measure == 0 ? Measure::gaussian : measure == 1 ? Measure::exponential : Measure::minimum;
  m.constellation.sigma = r.f64("sigma");
  m.constellation.lambda = r.f64("lambda");
  m.dropout_rate = r.f64("dropout");
  for (auto& norm : m.bn) {
    norm.momentum = r.f64("bn momentum");
    norm.epsilon = r.f64("bn epsilon");
  }
  const std::uint32_t text_len = r.u32("config length");
  r.need(text_len, "config text");
  const std::string text(reinterpret_cast<const char*>(bytes.data() + r.pos), text_len);
  r.pos += text_len;
  try {
    ck.config = parse_config_text(text);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("bad embedded configuration: ") + e.what(), r.pos - text_len);
  }

  const std::array<std::size_t, 4> widths{shape.stars, shape.hidden1, shape.hidden2, shape.classes};
  m.constellation.stars = r.tensor(shape.stars, shape.dim, "stars");
  for (std::size_t l = 0; l < 3; ++l) {
    m.dense[l].weights = r.tensor(widths[l + 1], widths[l], "dense weights");
    m.dense[l].bias = r.tensor(1, widths[l + 1], "dense bias");
    if (l < 2) {
      m.bn[l].gamma = r.tensor(1, widths[l + 1], "bn gamma");
      m.bn[l].beta = r.tensor(1, widths[l + 1], "bn beta");
      m.bn[l].running_mean = r.tensor(1, widths[l + 1], "bn running mean");
      m.bn[l].running_var = r.tensor(1, widths[l + 1], "bn running variance");
    }
  }
  if (r.pos != bytes.size()) throw ParseError("trailing bytes after checkpoint tensors", r.pos);
  m.class_count = shape.classes;
  try {
    m.validate();
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& model, const TrainConfig& config) {
  write_file_bytes(path, encode_checkpoint(model, config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.offset());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_snapshot_csv(std::ostream& out, std::size_t epoch, const Matrix<double>& stars) {
  out << "epoch,star_index";
  for (std::size_t k = 0; k < stars.cols(); ++k) out << ",x" << k;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < stars.rows(); ++i) {
    out << epoch << ',' << i;
    for (std::size_t k = 0; k < stars.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", stars(i, k));
      out << ',' << buf;
    }
    out << '\n';
  }
}

void save_snapshot_csv(const std::filesystem::path& path, std::size_t epoch, const Matrix<double>& stars) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_snapshot_csv(out, epoch, stars);
  if (!out) throw DataError("error writing '" + path.string() + "'");
}

Snapshot load_snapshot_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,star_index", 0) != 0)
    throw DataError(path.string() + ": missing snapshot header");
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
  Snapshot snap;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != dim + 2) throw DataError(path.string() + ": row " + std::to_string(rows) + " has wrong column count");
    try {
      const auto epoch = static_cast<std::size_t>(std::stoull(cells[0]));
      const auto index = static_cast<std::size_t>(std::stoull(cells[1]));
      if (rows == 0) snap.epoch = epoch;
      if (epoch != snap.epoch || index != rows) throw DataError(path.string() + ": rows out of order");
      for (std::size_t k = 0; k < dim; ++k) values.push_back(std::stod(cells[2 + k]));
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": unparseable row " + std::to_string(rows));
    }
    ++rows;
  }
  snap.stars = Matrix<double>(rows, dim, std::move(values));
  return snap;
}

std::filesystem::path snapshot_file_name(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "constellation_epoch_%04zu.csv", epoch);
  return buf;
}

double mean_star_displacement(const Matrix<double>& from, const Matrix<double>& to) {
  require(from.same_shape(to) && from.rows() > 0, "mean_star_displacement: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < from.rows(); ++i) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < from.cols(); ++k) {
      const double diff = to(i, k) - from(i, k);
      r2 += diff * diff;
    }
    total += std::sqrt(r2);
  }
  return total / static_cast<double>(from.rows());
}

template <typename T>
void write_model_summary(std::ostream& out, const ModelParams<T>& model) {
  struct Row {
    std::string layer, shape;
    std::size_t params;
  };
  const auto& c = model.constellation;
  const auto& dn = model.dense;
  auto arrow = [](const DenseLayer<T>& l) { return std::to_string(l.in()) + " -> " + std::to_string(l.out()); };
  const std::vector<Row> rows{
      {"ursa (" + std::string(to_string(c.measure)) + ")", std::to_string(c.m()) + " stars x " + std::to_string(c.d()),
       c.stars.size()},
      {"dense0 + relu", arrow(dn[0]), dn[0].weights.size() + dn[0].bias.size()},
      {"batchnorm0", std::to_string(model.bn[0].width()), model.bn[0].gamma.size() + model.bn[0].beta.size()},
      {"dense1 + relu", arrow(dn[1]), dn[1].weights.size() + dn[1].bias.size()},
      {"batchnorm1", std::to_string(model.bn[1].width()), model.bn[1].gamma.size() + model.bn[1].beta.size()},
      {"dropout", std::to_string(dn[2].in()), 0},
      {"dense2 + softmax", arrow(dn[2]), dn[2].weights.size() + dn[2].bias.size()},
  };
  out << std::left << std::setw(22) << "layer" << std::setw(22) << "shape" << std::right << std::setw(12)
      << "params" << '\n';
  for (const auto& r : rows)
    out << std::left << std::setw(22) << r.layer << std::setw(22) << r.shape << std::right << std::setw(12)
        << r.params << '\n';
  out << "total trainable parameters: " << model.trainable_parameter_count() << '\n';
}

template void write_model_summary(std::ostream&, const ModelParams<float>&);
template void write_model_summary(std::ostream&, const ModelParams<double>&);
template std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>&, const TrainConfig&);
template std::vector<std::uint8_t> encode_checkpoint(const ModelParams<double>&, const TrainConfig&);
template void save_checkpoint(const std::filesystem::path&, const ModelParams<float>&, const TrainConfig&);
template void save_checkpoint(const std::filesystem::path&, const ModelParams<double>&, const TrainConfig&);

}  // namespace ursa
