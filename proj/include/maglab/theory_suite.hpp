#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/theory.hpp"

namespace maglab {

struct Lemma1Case {
  std::int64_t n = 1;
  std::int64_t k = 1;
  double margin = 0.0;
  double min_probability = 0.0;  // case fails below this
  double probability = 0.0;      // filled in by the suite
};

struct TheorySuiteConfig {
  std::optional<MagParams> params;  // empty: fresh guaranteed parameters per config
  int configs = 200;                // per variant
  int convexity_grid = 256;
  int optimum_grid = 100000;
  std::vector<double> thetas{0.1, 0.3, 0.5, 0.7};
  double theta_sweep_B = 100.0;
  std::vector<double> masses{1.0, 10.0, 100.0, 1000.0};
  double mass_sweep_theta = 0.5;
  std::vector<ScalarVariant> variants{ScalarVariant::kMagFace, ScalarVariant::kMagCosFace};
  std::vector<Lemma1Case> lemma1{{85000, 1, 0.5, 1.0 - 1e-10, 0.0}, {2, 1, 0.0, 0.75, 0.0}};
  std::uint64_t seed = 0;  // stage seed, used as is

  void validate() const;
};

struct TheorySuiteReport {
  std::string status;  // passed | failed | skipped
  std::string reason;  // why skipped
  double lambda_lower_bound = 0.0;
  std::vector<CertificateReport> certificates;
  std::vector<Lemma1Case> lemma1;

  bool passed() const { return status != "failed"; }
  const CertificateReport* find(const std::string& property, const std::string& variant) const;
};

// Convexity, endpoint signs, optimum vs grid argmin, both monotonicity sweeps and the
// Lemma 1 cases. Fixed parameters outside the guaranteed regime short-circuit to
// status "skipped".
TheorySuiteReport run_theory_suite(const TheorySuiteConfig& cfg);

void to_json(nlohmann::json& j, const Lemma1Case& c);
void to_json(nlohmann::json& j, const TheorySuiteConfig& c);
void from_json(const nlohmann::json& j, TheorySuiteConfig& c);
void to_json(nlohmann::json& j, const TheorySuiteReport& r);

}  // namespace maglab
