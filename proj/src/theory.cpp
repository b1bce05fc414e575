#include "maglab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace maglab {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// e^x / (1 + e^x) without overflow.
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double target_logit(double a, const ScalarLossConfig& cfg) {
  const MagParams& p = cfg.params;
  const double m = p.slope() * (a - p.l_a) + p.l_m;
  return cfg.variant == ScalarVariant::kMagFace ? p.s * std::cos(cfg.theta_y + m)
                                                : p.s * (std::cos(cfg.theta_y) - m);
}

void check_interval(double a, const ScalarLossConfig& cfg, const char* who) {
  if (!(a >= cfg.params.l_a && a <= cfg.params.u_a)) {
    throw DomainError(std::string(who) + ": magnitude outside [l_a, u_a]");
  }
}

// L(a1) - L(a2) without subtracting two nearly equal losses. Near a flat optimum the
// two losses agree to machine precision while their difference is still well defined.
double loss_difference(double a1, double a2, const ScalarLossConfig& cfg) {
  const MagParams& p = cfg.params;
  const double m1 = p.slope() * (a1 - p.l_a) + p.l_m;
  const double m2 = p.slope() * (a2 - p.l_a) + p.l_m;
  const double dm = p.slope() * (a1 - a2);
  // t_i = log B - A_i ; d = t1 - t2 = A2 - A1
  double d = 0.0;
  if (cfg.variant == ScalarVariant::kMagFace) {
    d = 2.0 * p.s * std::sin(cfg.theta_y + 0.5 * (m1 + m2)) * std::sin(0.5 * dm);
  } else {
    d = p.s * dm;
  }
  const double t2 = std::log(cfg.B) - target_logit(a2, cfg);
  // softplus(t1) - softplus(t2) = log1p(logistic(t2) * expm1(d))
  const double cls = std::log1p(logistic(t2) * std::expm1(d));
  const double reg = p.lambda_g * (a1 - a2) * (1.0 / (p.u_a * p.u_a) - 1.0 / (a1 * a2));
  return cls + reg;
}

double optimum_for(const ScalarLossConfig& cfg) { return optimal_magnitude(cfg).a_star; }

MonotonicityResult check_nonincreasing(std::vector<double> values) {
  MonotonicityResult out;
  out.a_star = std::move(values);
  for (std::size_t k = 1; k < out.a_star.size(); ++k) {
    out.worst_violation = std::max(out.worst_violation, out.a_star[k] - out.a_star[k - 1]);
  }
  out.pass = out.worst_violation <= kMonotonicityTolerance;
  return out;
}

}  // namespace

std::string to_string(ScalarVariant v) {
  return v == ScalarVariant::kMagFace ? "magface" : "magcosface";
}

ScalarVariant scalar_variant_from_string(const std::string& name) {
  if (name == "magface") return ScalarVariant::kMagFace;
  if (name == "magcosface") return ScalarVariant::kMagCosFace;
  throw ConfigError("unknown scalar variant '" + name + "'");
}

void ScalarLossConfig::validate() const {
  params.validate();
  if (!(B > 0.0) || !std::isfinite(B)) throw ConfigError("ScalarLossConfig: B must be positive");
  if (!(theta_y >= 0.0 && theta_y <= std::numbers::pi)) {
    throw ConfigError("ScalarLossConfig: theta_y must lie in [0, pi]");
  }
}

bool ScalarLossConfig::in_guaranteed_regime() const {
  if (!params.guarantees_hold()) return false;
  if (variant == ScalarVariant::kMagFace) return theta_y + params.u_m <= std::numbers::pi / 2.0;
  return true;
}

double scalar_loss(double a, const ScalarLossConfig& cfg) {
  check_interval(a, cfg, "scalar_loss");
  const double A = target_logit(a, cfg);
  // -log(e^A / (e^A + B)) = log(1 + B e^-A)
  return softplus(std::log(cfg.B) - A) + cfg.params.lambda_g * regularizer(a, cfg.params);
}

double scalar_loss_deriv(double a, const ScalarLossConfig& cfg) {
  check_interval(a, cfg, "scalar_loss_deriv");
  const MagParams& p = cfg.params;
  const double A = target_logit(a, cfg);
  const double competition = logistic(std::log(cfg.B) - A);  // B / (e^A + B)
  double angular = 1.0;
  if (cfg.variant == ScalarVariant::kMagFace) {
    angular = std::sin(cfg.theta_y + p.slope() * (a - p.l_a) + p.l_m);
  }
  return p.s * p.slope() * competition * angular + p.lambda_g * regularizer_deriv(a, p);
}

OptimumReport optimal_magnitude(const ScalarLossConfig& cfg) {
  cfg.validate();
  const double lo = cfg.params.l_a;
  const double hi = cfg.params.u_a;

  // Sign scan: a convex restriction has a nondecreasing derivative, so the sign
  // can never go from + back to -.
  {
    const double step = (hi - lo) / (kSignScanPoints - 1);
    double last_pos = std::numeric_limits<double>::quiet_NaN();
    double first_neg = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < kSignScanPoints; ++k) {
      const double a = (k == kSignScanPoints - 1) ? hi : lo + k * step;
      const double d = scalar_loss_deriv(a, cfg);
      if (d < 0.0 && std::isnan(first_neg)) first_neg = a;
      if (d > 0.0) last_pos = a;
      if (d < 0.0 && !std::isnan(last_pos)) {
        throw PropertyViolation("optimal_magnitude: derivative sign pattern -,+,- (non-convex)",
                                {first_neg, last_pos, a});
      }
    }
  }

  constexpr double kInvPhi = 0.6180339887498948482;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  int iterations = 0;
  while (b - a > kGoldenTolerance) {
    if (loss_difference(x1, x2, cfg) <= 0.0) {
      b = x2;
      x2 = x1;
      x1 = b - kInvPhi * (b - a);
    } else {
      a = x1;
      x1 = x2;
      x2 = a + kInvPhi * (b - a);
    }
    ++iterations;
  }

  OptimumReport out;
  out.a_star = std::clamp(0.5 * (a + b), lo, hi);
  out.loss_at_star = scalar_loss(out.a_star, cfg);
  out.deriv_at_la = scalar_loss_deriv(lo, cfg);
  out.deriv_at_ua = scalar_loss_deriv(hi, cfg);
  out.iterations = iterations;
  return out;
}

double optimal_magnitude_bisection(const ScalarLossConfig& cfg) {
  cfg.validate();
  double lo = cfg.params.l_a;
  double hi = cfg.params.u_a;
  if (scalar_loss_deriv(lo, cfg) >= 0.0) return lo;
  if (scalar_loss_deriv(hi, cfg) <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (scalar_loss_deriv(mid, cfg) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ConvexityResult convexity_certificate(const ScalarLossConfig& cfg, int grid_points) {
  if (grid_points < 64) throw ConfigError("convexity_certificate: grid_points must be >= 64");
  cfg.validate();
  const double lo = cfg.params.l_a;
  const double hi = cfg.params.u_a;
  const double h = (hi - lo) / (grid_points - 1);

  std::vector<double> values(static_cast<std::size_t>(grid_points));
  for (int k = 0; k < grid_points; ++k) {
    const double a = (k == grid_points - 1) ? hi : lo + k * h;
    values[static_cast<std::size_t>(k)] = scalar_loss(a, cfg);
  }

  ConvexityResult out;
  out.worst_second_difference = std::numeric_limits<double>::infinity();
  for (int k = 1; k + 1 < grid_points; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double d2 = (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (h * h);
    if (d2 < out.worst_second_difference) {
      out.worst_second_difference = d2;
      out.worst_at = lo + k * h;
    }
  }
  out.pass = out.worst_second_difference > kConvexityFloor;
  return out;
}

MonotonicityResult monotonic_in_theta(const ScalarLossConfig& base,
                                      const std::vector<double>& thetas) {
  if (!std::is_sorted(thetas.begin(), thetas.end())) {
    throw ConfigError("monotonic_in_theta: thetas must be ascending");
  }
  const double upper = std::numbers::pi / 2.0 - base.params.u_m;
  std::vector<double> stars;
  stars.reserve(thetas.size());
  for (double theta : thetas) {
    if (theta < 0.0 || theta > upper + 1e-12) {
      throw ConfigError("monotonic_in_theta: theta outside [0, pi/2 - u_m]");
    }
    ScalarLossConfig cfg = base;
    cfg.theta_y = theta;
    stars.push_back(optimum_for(cfg));
  }
  return check_nonincreasing(std::move(stars));
}

MonotonicityResult monotonic_in_B(const ScalarLossConfig& base, const std::vector<double>& masses) {
  if (!std::is_sorted(masses.begin(), masses.end())) {
    throw ConfigError("monotonic_in_B: masses must be ascending");
  }
  std::vector<double> stars;
  stars.reserve(masses.size());
  for (double b : masses) {
    if (!(b > 0.0)) throw ConfigError("monotonic_in_B: masses must be positive");
    ScalarLossConfig cfg = base;
    cfg.B = b;
    stars.push_back(optimum_for(cfg));
  }
  return check_nonincreasing(std::move(stars));
}

double lemma1_probability(std::int64_t n, std::int64_t k, double m_val) {
  if (n < 1 || k < 1 || k > n) throw DomainError("lemma1_probability: require 1 <= k <= n");
  if (!(m_val >= 0.0 && m_val <= std::numbers::pi / 2.0)) {
    throw DomainError("lemma1_probability: m_val must lie in [0, pi/2]");
  }
  const double p = (std::numbers::pi / 2.0 - m_val) / std::numbers::pi;
  if (p <= 0.0) return 0.0;  // only the i = 0 term survives and it equals 1

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) {
    const auto di = static_cast<double>(i);
    const auto dn = static_cast<double>(n);
    log_terms.push_back(log_n_fact - std::lgamma(di + 1.0) - std::lgamma(dn - di + 1.0) +
                        di * log_p + (dn - di) * log_q);
  }
  const double mx = *std::max_element(log_terms.begin(), log_terms.end());
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - mx);
  const double lower_tail = std::exp(mx + std::log(acc));
  return std::clamp(1.0 - lower_tail, 0.0, 1.0);
}

ScalarLossConfig sample_guaranteed_config(std::mt19937_64& rng, ScalarVariant variant) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MagParams p;
  p.s = 16.0 + 48.0 * unit(rng);
  p.l_a = 5.0 + 15.0 * unit(rng);
  p.u_a = p.l_a + 40.0 + 80.0 * unit(rng);
  p.l_m = 0.05 + 0.45 * unit(rng);
  p.u_m = std::min(p.l_m + 0.1 + 0.6 * unit(rng), 1.2);
  p.lambda_g = lambda_lower_bound(p) * (1.0 + unit(rng));
  return sample_guaranteed_config(rng, variant, p);
}

ScalarLossConfig sample_guaranteed_config(std::mt19937_64& rng, ScalarVariant variant,
                                          const MagParams& params) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ScalarLossConfig cfg;
  cfg.params = params;
  cfg.variant = variant;
  cfg.theta_y = std::max(0.0, std::numbers::pi / 2.0 - params.u_m) * unit(rng);
  cfg.B = std::exp(std::log(1e-2) + (std::log(1e4) - std::log(1e-2)) * unit(rng));
  return cfg;
}

void to_json(nlohmann::json& j, const CertificateReport& r) {
  j = nlohmann::json{{"property", r.property},
                     {"variant", r.variant},
                     {"configs_tested", r.configs_tested},
                     {"failures", r.failures},
                     {"worst_margin", r.worst_margin}};
}

void to_json(nlohmann::json& j, const ScalarLossConfig& c) {
  j = nlohmann::json{{"theta_y", c.theta_y},
                     {"B", c.B},
                     {"params", c.params},
                     {"variant", to_string(c.variant)}};
}

}  // namespace maglab
