#include "maglab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json_fields.hpp"
#include "maglab/errors.hpp"
#include "maglab/seeds.hpp"
#include "maglab/stats.hpp"

namespace maglab {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;

Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

struct Velocity {
  Matrix w1, w2, head;
  Vector b1;
};

}  // namespace

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kSoftmax: return "softmax";
    case LossVariant::kArcFace: return "arcface";
    case LossVariant::kCosFace: return "cosface";
    case LossVariant::kMagFace: return "magface";
    case LossVariant::kMagCosFace: return "magcosface";
  }
  return "unknown";
}

LossVariant loss_variant_from_string(const std::string& name) {
  for (auto v : {LossVariant::kSoftmax, LossVariant::kArcFace, LossVariant::kCosFace,
                 LossVariant::kMagFace, LossVariant::kMagCosFace}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("TrainConfig: unknown loss_variant '" + name + "'");
}

void TrainConfig::validate() const {
  params.validate();
  if (epochs <= 0) throw ConfigError("TrainConfig: epochs must be positive");
  if (batch_size <= 0) throw ConfigError("TrainConfig: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("TrainConfig: decay_factor must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("TrainConfig: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be nonnegative");
  if (hidden < 1) throw ConfigError("TrainConfig: hidden must be positive");
  if (!(s > 0.0)) throw ConfigError("TrainConfig: s must be positive");
  if (m < 0.0) throw ConfigError("TrainConfig: m must be nonnegative");
}

LossSpec TrainConfig::loss_spec() const {
  switch (loss_variant) {
    case LossVariant::kSoftmax: return LossSpec::normalized_softmax(s);
    case LossVariant::kArcFace: return LossSpec::arcface(s, m);
    case LossVariant::kCosFace: return LossSpec::cosface(s, m);
    case LossVariant::kMagFace: return LossSpec::magface(params);
    case LossVariant::kMagCosFace: return LossSpec::magcosface(params);
  }
  throw ConfigError("TrainConfig: invalid loss variant");
}

double TrainConfig::learning_rate_at(int epoch) const {
  double lr = learning_rate;
  for (int e : decay_epochs) {
    if (epoch >= e) lr *= decay_factor;
  }
  return lr;
}

double TrainConfig::initial_magnitude() const { return 0.5 * (params.l_a + params.u_a); }

Matrix EmbeddingModel::embed(const Matrix& inputs) const {
  Matrix pre = inputs * w1.transpose();
  pre.rowwise() += b1.transpose();
  const Matrix hid = pre.array().tanh().matrix();
  return hid * w2.transpose();
}

EmbeddingModel init_model(const std::vector<LabeledSample>& dataset, int dim_embed,
                          const TrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("init_model: empty dataset");
  std::mt19937_64 rng(derive_seed(cfg.seed, kInitStream));
  const auto dim_input = static_cast<Eigen::Index>(dataset.front().input.size());
  EmbeddingModel model;
  model.w1 = gaussian_matrix(rng, cfg.hidden, dim_input, 1.0);
  model.b1 = Vector::Zero(cfg.hidden);
  model.w2 = gaussian_matrix(rng, dim_embed, cfg.hidden, 1.0 / std::sqrt(cfg.hidden));
  const Eigen::Index classes =
      1 + std::max_element(dataset.begin(), dataset.end(), [](const auto& a, const auto& b) {
            return a.label < b.label;
          })->label;
  model.head.weights = gaussian_matrix(rng, std::max<Eigen::Index>(classes, 2), dim_embed, 1.0);

  const Matrix emb = model.embed(stack_inputs(dataset));
  const double mean_mag = emb.rowwise().norm().mean();
  model.w2 *= cfg.initial_magnitude() / mean_mag;
  return model;
}

TrainReport train(const std::vector<LabeledSample>& dataset, int dim_embed, const TrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  cfg.validate();
  const LossSpec spec = cfg.loss_spec();

  TrainReport report;
  report.model = init_model(dataset, dim_embed, cfg);
  EmbeddingModel& model = report.model;
  const Matrix inputs = stack_inputs(dataset);
  report.initial_mean_magnitude = model.embed(inputs).rowwise().norm().mean();

  Velocity vel{Matrix::Zero(model.w1.rows(), model.w1.cols()),
               Matrix::Zero(model.w2.rows(), model.w2.cols()),
               Matrix::Zero(model.head.weights.rows(), model.head.weights.cols()),
               Vector::Zero(model.b1.size())};

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  std::vector<Eigen::Index> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = cfg.learning_rate_at(epoch);
    double epoch_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto nb = static_cast<Eigen::Index>(stop - start);
      Matrix x(nb, inputs.cols());
      FeatureBatch batch;
      batch.labels.reserve(stop - start);
      for (Eigen::Index r = 0; r < nb; ++r) {
        const Eigen::Index idx = order[start + static_cast<std::size_t>(r)];
        x.row(r) = inputs.row(idx);
        batch.labels.push_back(dataset[static_cast<std::size_t>(idx)].label);
      }

      Matrix pre = x * model.w1.transpose();
      pre.rowwise() += model.b1.transpose();
      const Matrix hid = pre.array().tanh().matrix();
      batch.values = hid * model.w2.transpose();

      LossBreakdown out;
      try {
        out = evaluate_loss(batch, model.head, spec, true);
      } catch (const DomainError& e) {
        // non-finite weights surface as degenerate norms
        throw TrainingError("train: diverged at epoch " + std::to_string(epoch + 1) + " (" + e.what() + ")",
                            epoch + 1);
      }
      if (!std::isfinite(out.batch_mean)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch + 1), epoch + 1);
      }
      epoch_sum += out.batch_mean * static_cast<double>(nb);
      report.fallback_events += out.fallback_count();

      // backprop through W2 and tanh
      const Matrix g_w2 = out.grad_features.transpose() * hid;
      const Matrix g_hid = out.grad_features * model.w2;
      const Matrix g_pre = g_hid.cwiseProduct((1.0 - hid.array().square()).matrix());
      const Matrix g_w1 = g_pre.transpose() * x;
      const Vector g_b1 = g_pre.colwise().sum().transpose();

      vel.w1 = cfg.momentum * vel.w1 - lr * (g_w1 + cfg.weight_decay * model.w1);
      vel.w2 = cfg.momentum * vel.w2 - lr * (g_w2 + cfg.weight_decay * model.w2);
      vel.b1 = cfg.momentum * vel.b1 - lr * g_b1;
      vel.head = cfg.momentum * vel.head - lr * out.grad_head;
      model.w1 += vel.w1;
      model.w2 += vel.w2;
      model.b1 += vel.b1;
      model.head.weights += vel.head;
    }
    const double epoch_mean = epoch_sum / static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_mean)) {
      throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch + 1), epoch + 1);
    }
    report.loss_history.push_back(epoch_mean);
  }

  report.stats = collect_magnitude_stats(model, dataset);
  return report;
}

MagnitudeStats collect_magnitude_stats(const EmbeddingModel& model,
                                       const std::vector<LabeledSample>& dataset) {
  if (dataset.size() < 3) throw StatisticsError("collect_magnitude_stats: need at least 3 samples");
  const Matrix emb = model.embed(stack_inputs(dataset));
  const Matrix centers = model.head.weights.rowwise().normalized();

  MagnitudeStats out;
  std::vector<double> mags, cosines, qualities;
  int correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double a = emb.row(r).norm();
    const Vector sims = centers * (emb.row(r).transpose() / a);
    Eigen::Index best = 0;
    sims.maxCoeff(&best);
    const int y = dataset[i].label;
    if (best == y) ++correct;
    SampleStat s{y, dataset[i].true_quality, a, sims[y]};
    out.samples.push_back(s);
    mags.push_back(a);
    cosines.push_back(s.cos_theta);
    qualities.push_back(s.true_quality);
  }
  out.pearson_mag_cos = pearson(mags, cosines);
  out.spearman_mag_quality = spearman(mags, qualities);
  out.nearest_center_accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return out;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"loss_variant", to_string(c.loss_variant)},
                     {"params", c.params},
                     {"s", c.s},
                     {"m", c.m},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"decay_epochs", c.decay_epochs},
                     {"decay_factor", c.decay_factor},
                     {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay},
                     {"hidden", c.hidden},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const std::string where = "train";
  detail::require_object(j, where);
  detail::reject_unknown_keys(j,
                              {"loss_variant", "params", "s", "m", "epochs", "batch_size",
                               "learning_rate", "decay_epochs", "decay_factor", "momentum",
                               "weight_decay", "hidden", "seed"},
                              where);
  TrainConfig out;
  std::string variant = to_string(out.loss_variant);
  detail::read_field(j, "loss_variant", where, variant);
  out.loss_variant = loss_variant_from_string(variant);
  if (j.contains("params")) out.params = j.at("params").get<MagParams>();
  detail::read_field(j, "s", where, out.s);
  detail::read_field(j, "m", where, out.m);
  detail::read_field(j, "epochs", where, out.epochs);
  detail::read_field(j, "batch_size", where, out.batch_size);
  detail::read_field(j, "learning_rate", where, out.learning_rate);
  detail::read_field(j, "decay_epochs", where, out.decay_epochs);
  detail::read_field(j, "decay_factor", where, out.decay_factor);
  detail::read_field(j, "momentum", where, out.momentum);
  detail::read_field(j, "weight_decay", where, out.weight_decay);
  detail::read_field(j, "hidden", where, out.hidden);
  detail::read_field(j, "seed", where, out.seed);
  out.validate();
  c = out;
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"n_classes", s.n_classes},
                     {"dim_input", s.dim_input},
                     {"dim_embed", s.dim_embed},
                     {"samples_per_class", s.samples_per_class},
                     {"quality_noise_max", s.quality_noise_max},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  const std::string where = "data";
  detail::require_object(j, where);
  detail::reject_unknown_keys(
      j, {"n_classes", "dim_input", "dim_embed", "samples_per_class", "quality_noise_max", "seed"},
      where);
  SyntheticSpec out;
  detail::read_field(j, "n_classes", where, out.n_classes);
  detail::read_field(j, "dim_input", where, out.dim_input);
  detail::read_field(j, "dim_embed", where, out.dim_embed);
  detail::read_field(j, "samples_per_class", where, out.samples_per_class);
  detail::read_field(j, "quality_noise_max", where, out.quality_noise_max);
  detail::read_field(j, "seed", where, out.seed);
  out.validate();
  s = out;
}

}  // namespace maglab
