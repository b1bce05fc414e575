#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/trainer.hpp"
#include "maglab/verification.hpp"

namespace maglab {

// ConfigError when the file is missing or not valid JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// 17 significant digits: parsing the text back gives the same double.
std::string format_double(double v);

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> qualities;
  Matrix features;
};

// Header `id,label,quality,f0,...,f{d-1}`.
void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table);
// ConfigError naming the line and column on malformed input.
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path);

// Header `sample_id,label,true_quality,magnitude,cos_theta`, dataset order.
void write_samples_csv(const std::filesystem::path& path, const MagnitudeStats& stats);

// Header `reject_fraction,fnmr,valid`.
void write_reject_curve_csv(const std::filesystem::path& path, const RejectCurve& curve);

// Flat little-endian float64 array (w1, b1, w2, head in order, row-major) plus a JSON
// sidecar `<stem>.json` describing shapes and offsets.
void write_model(const std::filesystem::path& bin_path, const EmbeddingModel& model,
                 const nlohmann::json& meta);
EmbeddingModel read_model(const std::filesystem::path& bin_path);

}  // namespace maglab
