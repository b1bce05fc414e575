#include "maglab/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t line,
             const std::string& column) {
  T v{};
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": column '" + column +
                      "' is not a valid number: '" + cell + "'");
  }
  return v;
}

void put_double(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    bits = r;
  }
  char buf[8];
  std::memcpy(buf, &bits, 8);
  os.write(buf, 8);
}

double get_double(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw ConfigError("model.bin: truncated file");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    bits = r;
  }
  return std::bit_cast<double>(bits);
}

std::filesystem::path sidecar(const std::filesystem::path& bin) {
  auto p = bin;
  return p.replace_extension(".json");
}

}  // namespace

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table) {
  const auto n = static_cast<std::size_t>(table.features.rows());
  if (table.ids.size() != n || table.labels.size() != n || table.qualities.size() != n) {
    throw ConfigError("write_embeddings_csv: column lengths differ");
  }
  auto f = open_out(path);
  f << "id,label,quality";
  for (Eigen::Index k = 0; k < table.features.cols(); ++k) f << ",f" << k;
  f << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    f << table.ids[i] << ',' << table.labels[i] << ',' << format_double(table.qualities[i]);
    for (Eigen::Index k = 0; k < table.features.cols(); ++k) {
      f << ',' << format_double(table.features(static_cast<Eigen::Index>(i), k));
    }
    f << '\n';
  }
}

EmbeddingTable read_embeddings_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open embeddings file '" + path.string() + "'");
  std::string line;
  if (!std::getline(f, line)) throw ConfigError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "label" || header[2] != "quality") {
    throw ConfigError(path.string() + ": header must be id,label,quality,f0,...");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[3 + k] != "f" + std::to_string(k)) {
      throw ConfigError(path.string() + ": expected column 'f" + std::to_string(k) + "' in header");
    }
  }
  EmbeddingTable t;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    t.ids.push_back(cells[0]);
    t.labels.push_back(parse_cell<int>(cells[1], path, lineno, "label"));
    t.qualities.push_back(parse_cell<double>(cells[2], path, lineno, "quality"));
    std::vector<double> r(dim);
    for (std::size_t k = 0; k < dim; ++k) r[k] = parse_cell<double>(cells[3 + k], path, lineno, header[3 + k]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError(path.string() + ": no embedding rows");
  t.features = Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      t.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return t;
}

void write_samples_csv(const std::filesystem::path& path, const MagnitudeStats& stats) {
  auto f = open_out(path);
  f << "sample_id,label,true_quality,magnitude,cos_theta\n";
  for (std::size_t i = 0; i < stats.samples.size(); ++i) {
    const auto& s = stats.samples[i];
    f << i << ',' << s.label << ',' << format_double(s.true_quality) << ','
      << format_double(s.magnitude) << ',' << format_double(s.cos_theta) << '\n';
  }
}

void write_reject_curve_csv(const std::filesystem::path& path, const RejectCurve& curve) {
  auto f = open_out(path);
  f << "reject_fraction,fnmr,valid\n";
  for (std::size_t i = 0; i < curve.reject_fractions.size(); ++i) {
    f << format_double(curve.reject_fractions[i]) << ','
      << (curve.valid[i] ? format_double(curve.fnmr_values[i]) : std::string("nan")) << ','
      << (curve.valid[i] ? 1 : 0) << '\n';
  }
}

void write_model(const std::filesystem::path& bin_path, const EmbeddingModel& model,
                 const nlohmann::json& meta) {
  auto f = open_out(bin_path, std::ios::out | std::ios::binary);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  auto emit = [&](const char* name, const double* data, Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index i = 0; i < rows * cols; ++i) put_double(f, data[i]);
    tensors.push_back({{"name", name}, {"shape", {rows, cols}}, {"offset", offset}});
    offset += static_cast<std::size_t>(rows * cols);
  };
  emit("w1", model.w1.data(), model.w1.rows(), model.w1.cols());
  emit("b1", model.b1.data(), model.b1.size(), 1);
  emit("w2", model.w2.data(), model.w2.rows(), model.w2.cols());
  emit("head", model.head.weights.data(), model.head.weights.rows(), model.head.weights.cols());
  write_json_file(sidecar(bin_path), {{"format", "float64 little-endian, row-major"},
                                      {"file", bin_path.filename().string()},
                                      {"count", offset},
                                      {"tensors", tensors},
                                      {"meta", meta}});
}

EmbeddingModel read_model(const std::filesystem::path& bin_path) {
  const nlohmann::json side = read_json_file(sidecar(bin_path));
  std::ifstream f(bin_path, std::ios::binary);
  if (!f) throw ConfigError("cannot open model file '" + bin_path.string() + "'");
  EmbeddingModel m;
  auto shape = [&](const char* name) {
    for (const auto& t : side.at("tensors")) {
      if (t.at("name") == name) {
        return std::pair<Eigen::Index, Eigen::Index>(t.at("shape")[0].get<Eigen::Index>(),
                                                     t.at("shape")[1].get<Eigen::Index>());
      }
    }
    throw ConfigError("model sidecar: missing tensor '" + std::string(name) + "'");
  };
  auto fill = [&](double* data, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) data[i] = get_double(f);
  };
  auto [r1, c1] = shape("w1");
  m.w1.resize(r1, c1);
  fill(m.w1.data(), r1 * c1);
  auto [rb, cb] = shape("b1");
  m.b1.resize(rb * cb);
  fill(m.b1.data(), rb * cb);
  auto [r2, c2] = shape("w2");
  m.w2.resize(r2, c2);
  fill(m.w2.data(), r2 * c2);
  auto [rh, ch] = shape("head");
  m.head.weights.resize(rh, ch);
  fill(m.head.weights.data(), rh * ch);
  if (m.w2.cols() != m.w1.rows() || m.b1.size() != m.w1.rows() || m.head.weights.cols() != m.w2.rows()) {
    throw ConfigError("model sidecar: inconsistent tensor shapes");
  }
  return m;
}

}  // namespace maglab
