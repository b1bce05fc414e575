#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"
#include "maglab/mag_params.hpp"

namespace maglab {

enum class ScalarVariant { kMagFace, kMagCosFace };

std::string to_string(ScalarVariant v);
ScalarVariant scalar_variant_from_string(const std::string& name);

// Per-sample loss restricted to the magnitude variable, with the angle to the own
// class center and the inter-class mass B held fixed.
struct ScalarLossConfig {
  double theta_y = 0.0;
  double B = 1.0;
  MagParams params;
  ScalarVariant variant = ScalarVariant::kMagFace;

  void validate() const;

  // Parameters satisfy the lambda_g bound and u_m <= pi/2; for the angular
  // variant additionally theta_y + u_m <= pi/2.
  bool in_guaranteed_regime() const;
};

// Exact 1-D loss on [l_a, u_a]; DomainError outside the interval.
double scalar_loss(double a, const ScalarLossConfig& cfg);

// Analytic derivative with m'(a) = K on the closed interval (one-sided at the ends).
double scalar_loss_deriv(double a, const ScalarLossConfig& cfg);

struct OptimumReport {
  double a_star = 0.0;
  double loss_at_star = 0.0;
  double deriv_at_la = 0.0;
  double deriv_at_ua = 0.0;
  int iterations = 0;
};

// Derivative changes sign - + - across the scan, so the restriction is not convex.
class PropertyViolation : public std::runtime_error {
 public:
  PropertyViolation(const std::string& what, std::vector<double> witnesses)
      : std::runtime_error(what), witnesses_(std::move(witnesses)) {}
  const std::vector<double>& witnesses() const noexcept { return witnesses_; }

 private:
  std::vector<double> witnesses_;
};

inline constexpr double kGoldenTolerance = 1e-8;
inline constexpr int kSignScanPoints = 4097;

// Golden-section search on [l_a, u_a] down to an interval of width 1e-8.
// Throws PropertyViolation when a derivative scan finds a - + - sign pattern.
OptimumReport optimal_magnitude(const ScalarLossConfig& cfg);

// Bisection on the sign of scalar_loss_deriv; independent cross-check of the search.
double optimal_magnitude_bisection(const ScalarLossConfig& cfg);

struct ConvexityResult {
  bool pass = false;
  double worst_second_difference = 0.0;  // min over the grid of second difference / step^2
  double worst_at = 0.0;
};

inline constexpr double kConvexityFloor = 1e-12;

// Second central differences of scalar_loss on a uniform grid. Failure is reported,
// never thrown. grid_points must be >= 64.
ConvexityResult convexity_certificate(const ScalarLossConfig& cfg, int grid_points);

struct MonotonicityResult {
  bool pass = false;
  std::vector<double> a_star;
  double worst_violation = 0.0;  // largest increase a*[k+1] - a*[k] (<= tol on pass)
};

inline constexpr double kMonotonicityTolerance = 1e-6;

// a*(theta) over an ascending theta list; expected nonincreasing.
MonotonicityResult monotonic_in_theta(const ScalarLossConfig& base, const std::vector<double>& thetas);

// a*(B) over an ascending list of inter-class masses; expected nonincreasing.
MonotonicityResult monotonic_in_B(const ScalarLossConfig& base, const std::vector<double>& masses);

// Probability that at least k of n uniformly distributed angles leave room for the
// margin m_val, i.e. 1 - sum_{i<k} C(n,i) p^i (1-p)^(n-i) with p = (pi/2 - m_val)/pi.
double lemma1_probability(std::int64_t n, std::int64_t k, double m_val);

// Random parameters satisfying the lambda_g bound with u_m well below pi/2, and a
// (theta, B) pair inside the guaranteed regime for the requested variant.
ScalarLossConfig sample_guaranteed_config(std::mt19937_64& rng, ScalarVariant variant);

// Same, but with the given parameters held fixed (theta and B drawn).
ScalarLossConfig sample_guaranteed_config(std::mt19937_64& rng, ScalarVariant variant,
                                          const MagParams& params);

// Aggregated result of one property suite, serializable as
// {property, variant, configs_tested, failures, worst_margin}.
struct CertificateReport {
  std::string property;
  std::string variant;
  int configs_tested = 0;
  std::vector<nlohmann::json> failures;
  double worst_margin = 0.0;

  bool passed() const { return failures.empty(); }
};

void to_json(nlohmann::json& j, const CertificateReport& r);
void to_json(nlohmann::json& j, const ScalarLossConfig& c);

}  // namespace maglab
