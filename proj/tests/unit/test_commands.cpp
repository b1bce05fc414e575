#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "maglab/commands.hpp"
#include "maglab/errors.hpp"
#include "maglab/io.hpp"

namespace maglab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("maglab_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    write_json_file(p, j);
    return p;
  }

  int run(Command c, const fs::path& cfg, const std::string& out, std::optional<std::uint64_t> seed = {}) {
    log_.str("");
    err_.str("");
    return run_command(c, {cfg, dir_ / out, seed}, log_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream log_, err_;
};

json small_train(const std::string& variant) {
  return {{"seed", 11},
          {"data", {{"n_classes", 4}, {"samples_per_class", 40}, {"dim_input", 12}, {"dim_embed", 8}}},
          {"train", {{"loss_variant", variant}, {"epochs", 3}, {"hidden", 16}}}};
}

// Two tight clusters along e0 and e1; quality column is given per row.
EmbeddingTable two_blob_table(const std::vector<double>& qualities) {
  EmbeddingTable t;
  const int n = static_cast<int>(qualities.size());
  t.features = Matrix::Zero(n, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.01);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    t.ids.push_back("r" + std::to_string(i));
    t.labels.push_back(label);
    t.qualities.push_back(qualities[static_cast<std::size_t>(i)]);
    t.features(i, label) = 10.0;
    for (int k = 0; k < 3; ++k) t.features(i, k) += g(rng);
  }
  return t;
}

TEST_F(Commands, TrainIsByteReproducible) {
  const auto cfg = write_config("train.json", small_train("magface"));
  ASSERT_EQ(run(Command::kTrain, cfg, "a"), kExitOk) << err_.str();
  ASSERT_EQ(run(Command::kTrain, cfg, "b"), kExitOk) << err_.str();
  EXPECT_EQ(slurp(dir_ / "a/samples.csv"), slurp(dir_ / "b/samples.csv"));
  EXPECT_EQ(slurp(dir_ / "a/model.bin"), slurp(dir_ / "b/model.bin"));
  EXPECT_EQ(slurp(dir_ / "a/report.json"), slurp(dir_ / "b/report.json"));
  for (const char* f : {"report.json", "samples.csv", "model.bin", "model.json", "meta.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
}

TEST_F(Commands, SeedOverrideChangesOutput) {
  const auto cfg = write_config("train.json", small_train("magface"));
  ASSERT_EQ(run(Command::kTrain, cfg, "a"), kExitOk);
  ASSERT_EQ(run(Command::kTrain, cfg, "b", 12), kExitOk);
  EXPECT_NE(slurp(dir_ / "a/samples.csv"), slurp(dir_ / "b/samples.csv"));
  EXPECT_EQ(read_json_file(dir_ / "b/meta.json").at("seed"), 12);
}

TEST_F(Commands, UnknownVariantIsConfigError) {
  const auto cfg = write_config("train.json", small_train("sphereface"));
  EXPECT_EQ(run(Command::kTrain, cfg, "a"), kExitConfig);
  EXPECT_NE(err_.str().find("loss_variant"), std::string::npos) << err_.str();
}

TEST_F(Commands, BadFieldTypeNamesField) {
  json j = small_train("magface");
  j["train"]["epochs"] = "many";
  EXPECT_EQ(run(Command::kTrain, write_config("t.json", j), "a"), kExitConfig);
  EXPECT_NE(err_.str().find("train.epochs"), std::string::npos) << err_.str();

  j = small_train("magface");
  j["train"]["epoch"] = 3;
  EXPECT_EQ(run(Command::kTrain, write_config("t.json", j), "a"), kExitConfig);
  EXPECT_NE(err_.str().find("epoch"), std::string::npos) << err_.str();
}

TEST_F(Commands, MissingConfigFile) {
  EXPECT_EQ(run(Command::kTrain, dir_ / "nope.json", "a"), kExitConfig);
  EXPECT_EQ(run(Command::kEval, dir_ / "nope.json", "a"), kExitConfig);
  EXPECT_EQ(run(Command::kVerifyTheory, dir_ / "nope.json", "a"), kExitConfig);
}

TEST_F(Commands, InvalidJson) {
  std::ofstream(dir_ / "bad.json") << "{ \"seed\": ";
  EXPECT_EQ(run(Command::kTrain, dir_ / "bad.json", "a"), kExitConfig);
}

TEST_F(Commands, DivergenceExitCode) {
  json j = small_train("magface");
  j["train"]["learning_rate"] = 1e200;
  EXPECT_EQ(run(Command::kTrain, write_config("t.json", j), "a"), kExitDiverged);
  EXPECT_NE(err_.str().find("epoch"), std::string::npos);
}

TEST_F(Commands, VerifyTheorySmall) {
  const json j{{"seed", 3}, {"theory", {{"configs", 10}, {"optimum_grid", 2000}}}};
  ASSERT_EQ(run(Command::kVerifyTheory, write_config("v.json", j), "v"), kExitOk) << err_.str();
  const json r = read_json_file(dir_ / "v/report.json");
  EXPECT_EQ(r.at("status"), "passed");
  EXPECT_NEAR(r.at("lambda_lower_bound").get<double>(), 25.813333333333333, 1e-9);
}

TEST_F(Commands, VerifyTheoryOutsideRegimeIsSkipped) {
  const json params{{"s", 64}, {"l_a", 10}, {"u_a", 110}, {"l_m", 0.4}, {"u_m", 0.8}, {"lambda_g", 0}};
  const json j{{"seed", 3}, {"theory", {{"configs", 5}, {"params", params}}}};
  ASSERT_EQ(run(Command::kVerifyTheory, write_config("v.json", j), "v"), kExitOk) << err_.str();
  const json r = read_json_file(dir_ / "v/report.json");
  EXPECT_EQ(r.at("status"), "skipped");
  EXPECT_FALSE(r.at("reason").get<std::string>().empty());
}

TEST_F(Commands, EvalSingleLabelHasNoImpostors) {
  EmbeddingTable t = two_blob_table(std::vector<double>(6, 1.0));
  std::fill(t.labels.begin(), t.labels.end(), 7);
  write_embeddings_csv(dir_ / "e.csv", t);
  const json j{{"seed", 1}, {"eval", {{"embeddings", "e.csv"}}}};
  EXPECT_EQ(run(Command::kEval, write_config("eval.json", j), "out"), kExitNoImpostors);
}

TEST_F(Commands, EvalAllSingletonsHasNoGenuine) {
  EmbeddingTable t = two_blob_table(std::vector<double>(4, 1.0));
  t.labels = {0, 1, 2, 3};
  write_embeddings_csv(dir_ / "e.csv", t);
  const json j{{"seed", 1}, {"eval", {{"embeddings", "e.csv"}}}};
  EXPECT_EQ(run(Command::kEval, write_config("eval.json", j), "out"), kExitNoImpostors);
}

TEST_F(Commands, EvalPerfectSeparation) {
  std::vector<double> q(40);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<double>(i);
  write_embeddings_csv(dir_ / "e.csv", two_blob_table(q));
  const json j{{"seed", 1},
               {"eval",
                {{"embeddings", "e.csv"},
                 {"quality_source", "column"},
                 {"clustering", {{"dbscan_eps", 0.05}, {"dbscan_min_pts", 3}}}}}};
  ASSERT_EQ(run(Command::kEval, write_config("eval.json", j), "out"), kExitOk) << err_.str();
  const json v = read_json_file(dir_ / "out/verification.json");
  for (const auto& t : v.at("targets")) EXPECT_EQ(t.at("tar").get<double>(), 1.0);
  for (const auto& p : v.at("reject_curve").at("points")) {
    ASSERT_TRUE(p.at("valid").get<bool>());
    EXPECT_EQ(p.at("fnmr").get<double>(), 0.0);
  }
  const json c = read_json_file(dir_ / "out/clustering.json");
  for (const auto& r : c.at("results")) {
    EXPECT_DOUBLE_EQ(r.at("nmi").get<double>(), 1.0) << r.at("method");
    EXPECT_DOUBLE_EQ(r.at("bcubed_f").get<double>(), 1.0) << r.at("method");
  }
  const json a = read_json_file(dir_ / "out/aggregation.json");
  EXPECT_EQ(a.at("status"), "ok");
  EXPECT_EQ(a.at("tar_mean").get<double>(), 1.0);
  const std::string curve = slurp(dir_ / "out/reject_curve.csv");
  EXPECT_EQ(curve.rfind("reject_fraction,fnmr,valid\n", 0), 0u);
}

// Rows pulled between the blobs cause every error; the quality column marks them.
TEST_F(Commands, EvalQualityColumnOracleVersusConstant) {
  const int n = 40;
  std::vector<double> q(n, 1.0);
  EmbeddingTable t = two_blob_table(q);
  for (int i = 0; i < 8; ++i) {
    // push row i halfway towards the other blob
    t.features(i, 0) = t.features(i, 1) = 7.0;
    t.qualities[static_cast<std::size_t>(i)] = 0.0;
  }
  write_embeddings_csv(dir_ / "oracle.csv", t);
  std::fill(t.qualities.begin(), t.qualities.end(), 0.5);
  write_embeddings_csv(dir_ / "flat.csv", t);
  auto eval = [&](const char* csv, const char* out) {
    const json j{{"seed", 1},
                 {"eval",
                  {{"embeddings", csv}, {"quality_source", "column"}, {"fmr_target", 0.01},
                   {"reject_fractions", {0.0, 0.1, 0.2, 0.3}}}}};
    EXPECT_EQ(run(Command::kEval, write_config(std::string(out) + ".json", j), out), kExitOk) << err_.str();
    std::vector<double> fnmr;
    const json v = read_json_file(dir_ / out / "verification.json");
    for (const auto& p : v.at("reject_curve").at("points")) {
      fnmr.push_back(p.at("fnmr").get<double>());
    }
    return fnmr;
  };
  const auto oracle = eval("oracle.csv", "o");
  const auto flat = eval("flat.csv", "f");
  ASSERT_EQ(oracle.size(), 4u);
  EXPECT_GT(oracle[0], 0.0);
  EXPECT_EQ(oracle[1], oracle[0]);  // the 8-row tie group straddles the 10% cut, kept whole
  EXPECT_EQ(oracle[3], 0.0);
  for (std::size_t i = 1; i < oracle.size(); ++i) EXPECT_LE(oracle[i], oracle[i - 1]);
  for (double f : flat) EXPECT_EQ(f, flat[0]);
}

TEST_F(Commands, EvalFromTrainedModel) {
  const auto cfg = write_config("train.json", small_train("magface"));
  ASSERT_EQ(run(Command::kTrain, cfg, "model"), kExitOk) << err_.str();
  const json j{{"seed", 2}, {"eval", {{"model", "model"}, {"split", 1}, {"aggregation", {{"per_template", 2}}}}}};
  ASSERT_EQ(run(Command::kEval, write_config("eval.json", j), "ev"), kExitOk) << err_.str();
  for (const char* f : {"meta.json", "embeddings.csv", "verification.json", "reject_curve.csv", "aggregation.json",
                        "clustering.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "ev" / f)) << f;
  }
  const EmbeddingTable t = read_embeddings_csv(dir_ / "ev/embeddings.csv");
  EXPECT_EQ(t.features.rows(), 160);
  EXPECT_EQ(t.features.cols(), 8);
}

TEST_F(Commands, EvalRejectsBothSources) {
  const json j{{"seed", 1}, {"eval", {{"embeddings", "e.csv"}, {"model", "m"}}}};
  EXPECT_EQ(run(Command::kEval, write_config("eval.json", j), "out"), kExitConfig);
  const json k{{"seed", 1}, {"eval", {{"embeddings", "e.csv"}, {"quality_source", "oracle"}}}};
  EXPECT_EQ(run(Command::kEval, write_config("eval.json", k), "out"), kExitConfig);
  EXPECT_NE(err_.str().find("eval.quality_source"), std::string::npos);
}

TEST_F(Commands, EmbeddingsCsvRoundTripIsExact) {
  EmbeddingTable t;
  t.features = Matrix(3, 2);
  t.features << 0.1, -1e-300, 1.0 / 3.0, 12345.678901234567, std::nextafter(1.0, 2.0), -0.0;
  t.ids = {"a", "b", "c"};
  t.labels = {0, -1, 5};
  t.qualities = {0.25, 1e-17, 2.0 / 7.0};
  write_embeddings_csv(dir_ / "t.csv", t);
  const EmbeddingTable r = read_embeddings_csv(dir_ / "t.csv");
  EXPECT_EQ(r.ids, t.ids);
  EXPECT_EQ(r.labels, t.labels);
  EXPECT_EQ(r.qualities, t.qualities);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index k = 0; k < 2; ++k) EXPECT_EQ(r.features(i, k), t.features(i, k));
  }
}

TEST_F(Commands, EmbeddingsCsvErrorsNameLine) {
  std::ofstream(dir_ / "x.csv") << "id,label,quality,f0\na,0,1,0.5\nb,1,oops,0.5\n";
  try {
    read_embeddings_csv(dir_ / "x.csv");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("quality"), std::string::npos) << msg;
  }
  std::ofstream(dir_ / "y.csv") << "id,label,f0\n";
  EXPECT_THROW(read_embeddings_csv(dir_ / "y.csv"), ConfigError);
}

TEST_F(Commands, ModelRoundTripIsExact) {
  EmbeddingModel m;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  auto fill = [&](auto& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  };
  m.w1.resize(5, 3);
  m.b1.resize(5);
  m.w2.resize(4, 5);
  m.head.weights.resize(2, 4);
  fill(m.w1);
  fill(m.b1);
  fill(m.w2);
  fill(m.head.weights);
  write_model(dir_ / "model.bin", m, {{"note", "x"}});
  EXPECT_EQ(fs::file_size(dir_ / "model.bin"), 8u * (15 + 5 + 20 + 8));
  const EmbeddingModel r = read_model(dir_ / "model.bin");
  EXPECT_EQ(r.w1, m.w1);
  EXPECT_EQ(r.b1, m.b1);
  EXPECT_EQ(r.w2, m.w2);
  EXPECT_EQ(r.head.weights, m.head.weights);
  EXPECT_EQ(read_json_file(dir_ / "model.json").at("count"), 48);
}

}  // namespace
}  // namespace maglab
