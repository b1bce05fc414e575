#include "maglab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_fields.hpp"
#include "maglab/clustering.hpp"
#include "maglab/errors.hpp"
#include "maglab/io.hpp"
#include "maglab/seeds.hpp"
#include "maglab/theory_suite.hpp"
#include "maglab/trainer.hpp"
#include "maglab/verification.hpp"

namespace maglab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Loaded {
  json doc;
  std::uint64_t seed = 0;
  fs::path base_dir;
};

Loaded load_config(const CommandOptions& opts, std::initializer_list<const char*> allowed) {
  Loaded l;
  l.doc = read_json_file(opts.config);
  detail::require_object(l.doc, "config");
  detail::reject_unknown_keys(l.doc, allowed, "config");
  detail::read_field(l.doc, "seed", "", l.seed);
  if (opts.seed) l.seed = *opts.seed;
  l.base_dir = opts.config.parent_path();
  return l;
}

// Sub-config with its seed filled from the global seed unless pinned explicitly.
json stage(const Loaded& l, const char* key, std::uint64_t offset) {
  json sub = l.doc.contains(key) ? l.doc.at(key) : json::object();
  detail::require_object(sub, key);
  if (!sub.contains("seed")) sub["seed"] = derive_seed(l.seed, offset);
  return sub;
}

json finite_or_tag(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

json optional_stat(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ConfigError("cannot create output directory '" + out.string() + "'");
}

fs::path resolve(const Loaded& l, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : l.base_dir / path;
}

struct EvalConfig {
  std::string model;
  int split = 1;
  std::string embeddings;
  std::string quality_source = "magnitude";
  std::vector<double> far_targets{1e-3, 1e-2, 1e-1};
  double fmr_target = 0.01;
  std::vector<double> reject_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  int per_template = 4;
  double aggregation_far = 0.01;
  int kmeans_k = 0;  // 0: number of distinct labels
  int ahc_k = 0;
  double dbscan_eps = 0.1;
  int dbscan_min_pts = 5;
  std::uint64_t seed = 0;
};

EvalConfig parse_eval(const json& j) {
  const std::string w = "eval";
  detail::require_object(j, w);
  detail::reject_unknown_keys(j,
                              {"model", "split", "embeddings", "quality_source", "far_targets",
                               "fmr_target", "reject_fractions", "aggregation", "clustering", "seed"},
                              w);
  EvalConfig c;
  detail::read_field(j, "model", w, c.model);
  detail::read_field(j, "split", w, c.split);
  detail::read_field(j, "embeddings", w, c.embeddings);
  detail::read_field(j, "quality_source", w, c.quality_source);
  detail::read_field(j, "far_targets", w, c.far_targets);
  detail::read_field(j, "fmr_target", w, c.fmr_target);
  detail::read_field(j, "reject_fractions", w, c.reject_fractions);
  detail::read_field(j, "seed", w, c.seed);
  if (j.contains("aggregation")) {
    const auto& a = j.at("aggregation");
    detail::require_object(a, w + ".aggregation");
    detail::reject_unknown_keys(a, {"per_template", "far_target"}, w + ".aggregation");
    detail::read_field(a, "per_template", w + ".aggregation", c.per_template);
    detail::read_field(a, "far_target", w + ".aggregation", c.aggregation_far);
  }
  if (j.contains("clustering")) {
    const auto& a = j.at("clustering");
    detail::require_object(a, w + ".clustering");
    detail::reject_unknown_keys(a, {"kmeans_k", "ahc_k", "dbscan_eps", "dbscan_min_pts"}, w + ".clustering");
    detail::read_field(a, "kmeans_k", w + ".clustering", c.kmeans_k);
    detail::read_field(a, "ahc_k", w + ".clustering", c.ahc_k);
    detail::read_field(a, "dbscan_eps", w + ".clustering", c.dbscan_eps);
    detail::read_field(a, "dbscan_min_pts", w + ".clustering", c.dbscan_min_pts);
  }
  if (c.model.empty() == c.embeddings.empty()) {
    throw ConfigError("eval: exactly one of fields 'model' and 'embeddings' must be given");
  }
  if (c.quality_source != "magnitude" && c.quality_source != "column") {
    throw ConfigError("field 'eval.quality_source' must be \"magnitude\" or \"column\"");
  }
  if (!c.model.empty() && c.quality_source != "magnitude") {
    throw ConfigError("field 'eval.quality_source' must be \"magnitude\" when evaluating a model");
  }
  auto in_unit = [](double t) { return t > 0.0 && t <= 1.0; };
  for (double t : c.far_targets) {
    if (!in_unit(t)) throw ConfigError("field 'eval.far_targets' entries must lie in (0, 1]");
  }
  if (!in_unit(c.fmr_target)) throw ConfigError("field 'eval.fmr_target' must lie in (0, 1]");
  if (!in_unit(c.aggregation_far)) throw ConfigError("field 'eval.aggregation.far_target' must lie in (0, 1]");
  for (std::size_t i = 0; i < c.reject_fractions.size(); ++i) {
    const double r = c.reject_fractions[i];
    if (!(r >= 0.0 && r < 1.0) || (i > 0 && !(r > c.reject_fractions[i - 1]))) {
      throw ConfigError("field 'eval.reject_fractions' must be strictly ascending in [0, 1)");
    }
  }
  if (c.per_template < 1) throw ConfigError("field 'eval.aggregation.per_template' must be positive");
  if (c.kmeans_k < 0 || c.ahc_k < 0) throw ConfigError("field 'eval.clustering.*_k' must be nonnegative");
  if (!(c.dbscan_eps >= 0.0)) throw ConfigError("field 'eval.clustering.dbscan_eps' must be nonnegative");
  if (c.dbscan_min_pts < 1) throw ConfigError("field 'eval.clustering.dbscan_min_pts' must be positive");
  if (c.split < 0) throw ConfigError("field 'eval.split' must be nonnegative");
  return c;
}

json eval_to_json(const EvalConfig& c) {
  json j{{"quality_source", c.quality_source},
         {"far_targets", c.far_targets},
         {"fmr_target", c.fmr_target},
         {"reject_fractions", c.reject_fractions},
         {"aggregation", {{"per_template", c.per_template}, {"far_target", c.aggregation_far}}},
         {"clustering",
          {{"kmeans_k", c.kmeans_k},
           {"ahc_k", c.ahc_k},
           {"dbscan_eps", c.dbscan_eps},
           {"dbscan_min_pts", c.dbscan_min_pts}}},
         {"seed", c.seed}};
  if (!c.model.empty()) {
    j["model"] = c.model;
    j["split"] = c.split;
  } else {
    j["embeddings"] = c.embeddings;
  }
  return j;
}

json clustering_entry(const std::string& method, const json& params, const ClusteringResult& r,
                      const std::vector<int>& truth) {
  const BCubedScore b = bcubed_f(r.assignment, truth);
  return json{{"method", method},         {"params", params},           {"n_clusters", r.n_clusters},
              {"nmi", nmi(r.assignment, truth)}, {"bcubed_precision", b.precision},
              {"bcubed_recall", b.recall}, {"bcubed_f", b.f}};
}

}  // namespace

int cmd_verify_theory(const CommandOptions& opts, std::ostream& log) {
  const Loaded l = load_config(opts, {"seed", "theory"});
  const TheorySuiteConfig cfg = stage(l, "theory", kTheorySeedOffset).get<TheorySuiteConfig>();
  prepare_out(opts.out);

  const json meta{{"command", "verify-theory"}, {"seed", l.seed}, {"theory", cfg}};
  const TheorySuiteReport report = run_theory_suite(cfg);
  json out = report;
  out["meta"] = meta;
  write_json_file(opts.out / "report.json", out);
  write_json_file(opts.out / "meta.json", meta);

  log << "verify-theory: " << report.status;
  if (!report.reason.empty()) log << " (" << report.reason << ")";
  log << '\n';
  for (const auto& c : report.certificates) {
    log << "  " << c.property << " [" << c.variant << "] " << (c.passed() ? "pass" : "FAIL") << " ("
        << c.configs_tested << " cases, " << c.failures.size() << " failures)\n";
  }
  for (const auto& c : report.lemma1) {
    log << "  lemma1 n=" << c.n << " k=" << c.k << " m=" << c.margin << " p=" << format_double(c.probability)
        << '\n';
  }
  return report.passed() ? kExitOk : kExitFailed;
}

int cmd_train(const CommandOptions& opts, std::ostream& log) {
  const Loaded l = load_config(opts, {"seed", "data", "train"});
  const SyntheticSpec data = stage(l, "data", kDataSeedOffset).get<SyntheticSpec>();
  const TrainConfig cfg = stage(l, "train", kTrainSeedOffset).get<TrainConfig>();
  prepare_out(opts.out);

  const json meta{{"command", "train"}, {"seed", l.seed}, {"data", data}, {"train", cfg}};
  const auto dataset = generate_dataset(data);
  const TrainReport r = train(dataset, data.dim_embed, cfg);

  double final_mag = 0.0;
  for (const auto& s : r.stats.samples) final_mag += s.magnitude;
  final_mag /= static_cast<double>(r.stats.samples.size());

  const json report{{"meta", meta},
                    {"loss_variant", to_string(cfg.loss_variant)},
                    {"epochs", cfg.epochs},
                    {"loss_history", r.loss_history},
                    {"loss_descended", r.loss_history.back() < r.loss_history.front()},
                    {"initial_mean_magnitude", r.initial_mean_magnitude},
                    {"final_mean_magnitude", final_mag},
                    {"pearson_mag_cos", optional_stat(r.stats.pearson_mag_cos)},
                    {"pearson_degenerate", !r.stats.pearson_mag_cos.has_value()},
                    {"spearman_mag_quality", optional_stat(r.stats.spearman_mag_quality)},
                    {"spearman_degenerate", !r.stats.spearman_mag_quality.has_value()},
                    {"nearest_center_accuracy", r.stats.nearest_center_accuracy},
                    {"fallback_events", r.fallback_events}};
  write_json_file(opts.out / "report.json", report);
  write_samples_csv(opts.out / "samples.csv", r.stats);
  write_model(opts.out / "model.bin", r.model, meta);
  write_json_file(opts.out / "meta.json", meta);

  log << "train[" << to_string(cfg.loss_variant) << "]: loss " << r.loss_history.front() << " -> "
      << r.loss_history.back() << ", pearson(a, cos) "
      << (r.stats.pearson_mag_cos ? std::to_string(*r.stats.pearson_mag_cos) : "undefined")
      << ", spearman(a, q) "
      << (r.stats.spearman_mag_quality ? std::to_string(*r.stats.spearman_mag_quality) : "undefined")
      << ", accuracy " << r.stats.nearest_center_accuracy << '\n';
  return kExitOk;
}

int cmd_eval(const CommandOptions& opts, std::ostream& log) {
  const Loaded l = load_config(opts, {"seed", "eval"});
  EvalConfig cfg = parse_eval(stage(l, "eval", kEvalSeedOffset));

  EmbeddingTable table;
  json source;
  if (!cfg.model.empty()) {
    fs::path bin = resolve(l, cfg.model);
    if (fs::is_directory(bin)) bin /= "model.bin";
    if (!fs::exists(bin)) throw ConfigError("field 'eval.model': no model at '" + bin.string() + "'");
    const EmbeddingModel model = read_model(bin);
    const json side = read_json_file(fs::path(bin).replace_extension(".json"));
    if (!side.contains("meta") || !side.at("meta").contains("data")) {
      throw ConfigError("field 'eval.model': sidecar lacks the training data spec");
    }
    const SyntheticSpec data = side.at("meta").at("data").get<SyntheticSpec>();
    if (data.dim_input != model.dim_input()) throw ConfigError("field 'eval.model': input size mismatch");
    const auto samples = generate_split(data, static_cast<std::uint64_t>(cfg.split));
    table.features = model.embed(stack_inputs(samples));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      table.ids.push_back("s" + std::to_string(i));
      table.labels.push_back(samples[i].label);
      table.qualities.push_back(samples[i].true_quality);
    }
    source = {{"model", bin.string()}, {"split", cfg.split}, {"data", data}};
  } else {
    const fs::path csv = resolve(l, cfg.embeddings);
    table = read_embeddings_csv(csv);
    source = {{"embeddings", csv.string()}};
  }
  const Eigen::Index m = table.features.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double n = table.features.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ConfigError("embeddings: row " + std::to_string(i) + " is zero or non-finite");
    }
  }

  const PairProtocol protocol = all_pairs_protocol(table.labels);
  if (protocol.impostor_count() == 0) throw ProtocolError("eval: the protocol has no impostor pairs");
  if (protocol.genuine_count() == 0) throw ProtocolError("eval: the protocol has no genuine pairs");
  prepare_out(opts.out);

  const json meta{{"command", "eval"}, {"seed", l.seed}, {"eval", eval_to_json(cfg)}, {"source", source}};
  write_json_file(opts.out / "meta.json", meta);
  if (!cfg.model.empty()) write_embeddings_csv(opts.out / "embeddings.csv", table);

  // verification
  const PairScores scores = score_pairs(protocol, table.features);
  json targets = json::array();
  for (double far : cfg.far_targets) {
    const ThresholdResult t = fnmr_at_fmr(scores.genuine, scores.impostor, far);
    targets.push_back({{"far", far}, {"tar", 1.0 - t.fnmr}, {"threshold", finite_or_tag(t.threshold)}});
  }

  std::vector<double> quality(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    quality[i] = cfg.quality_source == "magnitude" ? table.features.row(i).norm() : table.qualities[i];
  }
  const RejectCurve curve =
      error_versus_reject(protocol, table.features, quality, cfg.reject_fractions, cfg.fmr_target);
  write_reject_curve_csv(opts.out / "reject_curve.csv", curve);
  json points = json::array();
  for (std::size_t i = 0; i < curve.reject_fractions.size(); ++i) {
    points.push_back({{"reject_fraction", curve.reject_fractions[i]},
                      {"rejected", curve.rejected[i]},
                      {"valid", static_cast<bool>(curve.valid[i])},
                      {"fnmr", finite_or_tag(curve.fnmr_values[i])},
                      {"threshold", finite_or_tag(curve.thresholds[i])}});
  }
  write_json_file(opts.out / "verification.json",
                  {{"meta", meta},
                   {"embeddings", m},
                   {"genuine_pairs", scores.genuine.size()},
                   {"impostor_pairs", scores.impostor.size()},
                   {"targets", targets},
                   {"reject_curve",
                    {{"file", "reject_curve.csv"},
                     {"quality_source", cfg.quality_source},
                     {"fmr_target", cfg.fmr_target},
                     {"threshold_rule", "recomputed per reject level on surviving impostor pairs"},
                     {"tie_rule", "a quality tie group straddling the cut is kept whole"},
                     {"points", points}}}});

  // aggregation
  json agg{{"meta", meta}, {"per_template", cfg.per_template}, {"far_target", cfg.aggregation_far}};
  const TemplateSet templates = make_templates(table.labels, cfg.per_template);
  const PairProtocol tp = all_pairs_protocol(templates.labels);
  agg["templates"] = templates.members.size();
  if (tp.genuine_count() == 0 || tp.impostor_count() == 0) {
    agg["status"] = "unavailable";
    agg["reason"] = "templates form no genuine or no impostor pair";
  } else {
    try {
      const double tm = template_tar_at_far(table.features, templates, AggregationRule::kMean, cfg.aggregation_far);
      const double tpl =
          template_tar_at_far(table.features, templates, AggregationRule::kMagFacePlus, cfg.aggregation_far);
      agg["status"] = "ok";
      agg["tar_mean"] = tm;
      agg["tar_magface_plus"] = tpl;
    } catch (const AggregationError& e) {
      agg["status"] = "degenerate";
      agg["reason"] = e.what();
    }
  }
  write_json_file(opts.out / "aggregation.json", agg);

  // clustering
  const int classes = static_cast<int>(std::set<int>(table.labels.begin(), table.labels.end()).size());
  const int km_k = std::min<int>(cfg.kmeans_k > 0 ? cfg.kmeans_k : classes, static_cast<int>(m));
  const int ahc_k = std::min<int>(cfg.ahc_k > 0 ? cfg.ahc_k : classes, static_cast<int>(m));
  json results = json::array();
  results.push_back(clustering_entry("kmeans", {{"k", km_k}, {"seed", cfg.seed}},
                                     kmeans(table.features, km_k, cfg.seed), table.labels));
  results.push_back(clustering_entry("ahc", {{"k", ahc_k}, {"linkage", "average"}, {"distance", "cosine"}},
                                     ahc(table.features, ahc_k), table.labels));
  results.push_back(clustering_entry("dbscan",
                                     {{"eps", cfg.dbscan_eps}, {"min_pts", cfg.dbscan_min_pts},
                                      {"distance", "cosine"}},
                                     dbscan(table.features, cfg.dbscan_eps, cfg.dbscan_min_pts),
                                     table.labels));
  write_json_file(opts.out / "clustering.json",
                  {{"meta", meta}, {"nmi_normalization", "arithmetic mean"}, {"results", results}});

  log << "eval: " << m << " embeddings, " << scores.genuine.size() << " genuine / " << scores.impostor.size()
      << " impostor pairs\n";
  for (const auto& t : targets) log << "  TAR@FAR=" << t["far"] << ": " << t["tar"] << '\n';
  for (std::size_t i = 0; i < curve.reject_fractions.size(); ++i) {
    log << "  reject " << curve.reject_fractions[i] << ": fnmr "
        << (curve.valid[i] ? std::to_string(curve.fnmr_values[i]) : "invalid") << '\n';
  }
  if (agg["status"] == "ok") {
    log << "  aggregation TAR mean " << agg["tar_mean"] << ", magface+ " << agg["tar_magface_plus"] << '\n';
  }
  for (const auto& r : results) {
    log << "  " << r["method"].get<std::string>() << ": nmi " << r["nmi"] << ", bcubed f " << r["bcubed_f"] << '\n';
  }
  return kExitOk;
}

int run_command(Command cmd, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    switch (cmd) {
      case Command::kVerifyTheory: return cmd_verify_theory(opts, log);
      case Command::kTrain: return cmd_train(opts, log);
      case Command::kEval: return cmd_eval(opts, log);
    }
    return kExitFailed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ProtocolError& e) {
    err << "protocol error: " << e.what() << '\n';
    return kExitNoImpostors;
  } catch (const TrainingError& e) {
    err << "training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}

}  // namespace maglab
