#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/loss.hpp"
#include "maglab/mag_params.hpp"
#include "maglab/synthetic.hpp"

namespace maglab {

enum class LossVariant { kSoftmax, kArcFace, kCosFace, kMagFace, kMagCosFace };

std::string to_string(LossVariant v);
// Throws ConfigError for unknown names.
LossVariant loss_variant_from_string(const std::string& name);

struct TrainConfig {
  LossVariant loss_variant = LossVariant::kMagFace;
  MagParams params;             // magface / magcosface
  double s = 64.0;              // softmax / arcface / cosface scale
  double m = 0.5;               // arcface / cosface margin
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.1;
  std::vector<int> decay_epochs{15, 25};  // lr divided by 1/decay_factor at each
  double decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int hidden = 64;
  std::uint64_t seed = 0;

  void validate() const;
  LossSpec loss_spec() const;
  double learning_rate_at(int epoch) const;  // epoch is 0-based
  // Magnitude the initial embedding is scaled to.
  double initial_magnitude() const;
};

// input -> tanh(W1 x + b1) -> W2 h (no bias, no normalization), plus the class head.
struct EmbeddingModel {
  Matrix w1;  // hidden x dim_input
  Vector b1;
  Matrix w2;  // dim_embed x hidden
  ClassHead head;

  Matrix embed(const Matrix& inputs) const;  // rows in, rows out
  int dim_input() const { return static_cast<int>(w1.cols()); }
  int dim_embed() const { return static_cast<int>(w2.rows()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
};

struct SampleStat {
  int label = 0;
  double true_quality = 0.0;
  double magnitude = 0.0;
  double cos_theta = 0.0;  // cosine to own class center
};

struct MagnitudeStats {
  std::vector<SampleStat> samples;
  std::optional<double> pearson_mag_cos;       // nullopt: zero variance
  std::optional<double> spearman_mag_quality;
  double nearest_center_accuracy = 0.0;
};

struct TrainReport {
  std::vector<double> loss_history;  // epoch-mean loss, one entry per epoch
  double initial_mean_magnitude = 0.0;
  MagnitudeStats stats;
  EmbeddingModel model;
  int fallback_events = 0;  // samples that hit the theta + m > pi extension
};

// Random network scaled so the mean initial magnitude over `dataset` equals
// cfg.initial_magnitude().
EmbeddingModel init_model(const std::vector<LabeledSample>& dataset, int dim_embed,
                          const TrainConfig& cfg);

// Mini-batch SGD with momentum; weight decay on W1/W2 only. Single-threaded and
// deterministic given the seed. Throws TrainingError on a non-finite loss.
TrainReport train(const std::vector<LabeledSample>& dataset, int dim_embed, const TrainConfig& cfg);

// Per-sample magnitude, cosine to own center, and the two correlations.
// Throws StatisticsError for fewer than 3 samples.
MagnitudeStats collect_magnitude_stats(const EmbeddingModel& model,
                                       const std::vector<LabeledSample>& dataset);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

}  // namespace maglab
