#include "maglab/theory_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "json_fields.hpp"

namespace maglab {

namespace {

double grid_argmin(const ScalarLossConfig& c, int points) {
  const double lo = c.params.l_a;
  const double hi = c.params.u_a;
  const double h = (hi - lo) / (points - 1);
  double best = std::numeric_limits<double>::infinity();
  double best_a = lo;
  for (int i = 0; i < points; ++i) {
    const double a = i == points - 1 ? hi : lo + i * h;
    const double v = scalar_loss(a, c);
    if (v < best) {
      best = v;
      best_a = a;
    }
  }
  return best_a;
}

nlohmann::json witness(const ScalarLossConfig& c) { return c; }

CertificateReport make_report(const char* property, ScalarVariant v) {
  CertificateReport r;
  r.property = property;
  r.variant = to_string(v);
  r.worst_margin = std::numeric_limits<double>::infinity();
  return r;
}

ScalarLossConfig sweep_base(const TheorySuiteConfig& cfg, ScalarVariant v, double theta, double B) {
  ScalarLossConfig c;
  c.params = cfg.params.value_or(MagParams{});
  c.variant = v;
  c.theta_y = theta;
  c.B = B;
  return c;
}

void monotonic_report(CertificateReport& r, const MonotonicityResult& m, const char* axis,
                      const std::vector<double>& values, const ScalarLossConfig& base) {
  r.configs_tested = static_cast<int>(values.size());
  r.worst_margin = kMonotonicityTolerance - m.worst_violation;
  if (!m.pass) {
    r.failures.push_back({{"base", witness(base)}, {axis, values}, {"a_star", m.a_star},
                          {"worst_violation", m.worst_violation}});
  }
}

}  // namespace

void TheorySuiteConfig::validate() const {
  if (params) params->validate();
  if (configs < 1) throw ConfigError("field 'configs' must be positive");
  if (convexity_grid < 64) throw ConfigError("field 'convexity_grid' must be at least 64");
  if (optimum_grid < 2) throw ConfigError("field 'optimum_grid' must be at least 2");
  if (variants.empty()) throw ConfigError("field 'variants' must not be empty");
  if (!(theta_sweep_B > 0.0)) throw ConfigError("field 'theta_sweep_B' must be positive");
  if (!(mass_sweep_theta >= 0.0)) throw ConfigError("field 'mass_sweep_theta' must be nonnegative");
  for (const auto& c : lemma1) {
    if (c.n < 1 || c.k < 1 || c.k > c.n) throw ConfigError("field 'lemma1': require 1 <= k <= n");
    if (!(c.margin >= 0.0 && c.margin <= std::numbers::pi / 2.0)) {
      throw ConfigError("field 'lemma1': margin must lie in [0, pi/2]");
    }
  }
}

const CertificateReport* TheorySuiteReport::find(const std::string& property,
                                                 const std::string& variant) const {
  for (const auto& c : certificates) {
    if (c.property == property && c.variant == variant) return &c;
  }
  return nullptr;
}

TheorySuiteReport run_theory_suite(const TheorySuiteConfig& cfg) {
  cfg.validate();
  TheorySuiteReport out;
  out.lambda_lower_bound = lambda_lower_bound(cfg.params.value_or(MagParams{}));
  if (cfg.params && !cfg.params->guarantees_hold()) {
    out.status = "skipped";
    out.reason = cfg.params->u_m > std::numbers::pi / 2.0
                     ? "u_m exceeds pi/2; parameters are outside the guaranteed regime"
                     : "lambda_g is below its lower bound; parameters are outside the guaranteed regime";
    return out;
  }

  std::mt19937_64 rng(cfg.seed);
  for (ScalarVariant v : cfg.variants) {
    CertificateReport convex = make_report("convexity", v);
    CertificateReport ends = make_report("endpoint_signs", v);
    CertificateReport optimum = make_report("optimum_grid_agreement", v);
    for (int t = 0; t < cfg.configs; ++t) {
      const ScalarLossConfig c =
          cfg.params ? sample_guaranteed_config(rng, v, *cfg.params) : sample_guaranteed_config(rng, v);

      const ConvexityResult cr = convexity_certificate(c, cfg.convexity_grid);
      convex.worst_margin = std::min(convex.worst_margin, cr.worst_second_difference);
      if (!cr.pass) {
        convex.failures.push_back({{"config", witness(c)},
                                   {"worst_second_difference", cr.worst_second_difference},
                                   {"at", cr.worst_at}});
      }

      const double d_lo = scalar_loss_deriv(c.params.l_a, c);
      const double d_hi = scalar_loss_deriv(c.params.u_a, c);
      ends.worst_margin = std::min({ends.worst_margin, -d_lo, d_hi});
      if (!(d_lo < 0.0 && d_hi > 0.0)) {
        ends.failures.push_back({{"config", witness(c)}, {"deriv_at_la", d_lo}, {"deriv_at_ua", d_hi}});
      }

      const double tol = 2.0 * (c.params.u_a - c.params.l_a) / cfg.optimum_grid;
      try {
        const double a_star = optimal_magnitude(c).a_star;
        const double grid = grid_argmin(c, cfg.optimum_grid);
        const double gap = std::abs(a_star - grid);
        optimum.worst_margin = std::min(optimum.worst_margin, tol - gap);
        if (gap > tol) {
          optimum.failures.push_back(
              {{"config", witness(c)}, {"a_star", a_star}, {"grid_argmin", grid}, {"tolerance", tol}});
        }
      } catch (const PropertyViolation& e) {
        optimum.worst_margin = -std::numeric_limits<double>::infinity();
        optimum.failures.push_back({{"config", witness(c)}, {"error", e.what()}, {"witnesses", e.witnesses()}});
      }
    }
    convex.configs_tested = ends.configs_tested = optimum.configs_tested = cfg.configs;
    out.certificates.push_back(std::move(convex));
    out.certificates.push_back(std::move(ends));
    out.certificates.push_back(std::move(optimum));

    CertificateReport by_theta = make_report("monotonic_theta", v);
    const ScalarLossConfig tb = sweep_base(cfg, v, 0.0, cfg.theta_sweep_B);
    monotonic_report(by_theta, monotonic_in_theta(tb, cfg.thetas), "thetas", cfg.thetas, tb);
    out.certificates.push_back(std::move(by_theta));

    CertificateReport by_mass = make_report("monotonic_B", v);
    const ScalarLossConfig mb = sweep_base(cfg, v, cfg.mass_sweep_theta, 1.0);
    monotonic_report(by_mass, monotonic_in_B(mb, cfg.masses), "masses", cfg.masses, mb);
    out.certificates.push_back(std::move(by_mass));
  }

  bool ok = std::all_of(out.certificates.begin(), out.certificates.end(),
                        [](const CertificateReport& r) { return r.passed(); });
  for (Lemma1Case c : cfg.lemma1) {
    c.probability = lemma1_probability(c.n, c.k, c.margin);
    ok = ok && c.probability >= c.min_probability;
    out.lemma1.push_back(c);
  }
  out.status = ok ? "passed" : "failed";
  return out;
}

void to_json(nlohmann::json& j, const Lemma1Case& c) {
  j = nlohmann::json{{"n", c.n},
                     {"k", c.k},
                     {"margin", c.margin},
                     {"min_probability", c.min_probability},
                     {"probability", c.probability},
                     {"passed", c.probability >= c.min_probability}};
}

void to_json(nlohmann::json& j, const TheorySuiteConfig& c) {
  std::vector<std::string> variants;
  for (auto v : c.variants) variants.push_back(to_string(v));
  nlohmann::json lemma = nlohmann::json::array();
  for (const auto& l : c.lemma1) {
    lemma.push_back({{"n", l.n}, {"k", l.k}, {"margin", l.margin}, {"min_probability", l.min_probability}});
  }
  j = nlohmann::json{{"params", c.params ? nlohmann::json(*c.params) : nlohmann::json(nullptr)},
                     {"configs", c.configs},
                     {"convexity_grid", c.convexity_grid},
                     {"optimum_grid", c.optimum_grid},
                     {"thetas", c.thetas},
                     {"theta_sweep_B", c.theta_sweep_B},
                     {"masses", c.masses},
                     {"mass_sweep_theta", c.mass_sweep_theta},
                     {"variants", variants},
                     {"lemma1", lemma},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TheorySuiteConfig& c) {
  const std::string where = "theory";
  detail::require_object(j, where);
  detail::reject_unknown_keys(j,
                              {"params", "configs", "convexity_grid", "optimum_grid", "thetas",
                               "theta_sweep_B", "masses", "mass_sweep_theta", "variants", "lemma1",
                               "seed"},
                              where);
  TheorySuiteConfig out;
  if (j.contains("params") && !j.at("params").is_null()) out.params = j.at("params").get<MagParams>();
  detail::read_field(j, "configs", where, out.configs);
  detail::read_field(j, "convexity_grid", where, out.convexity_grid);
  detail::read_field(j, "optimum_grid", where, out.optimum_grid);
  detail::read_field(j, "thetas", where, out.thetas);
  detail::read_field(j, "theta_sweep_B", where, out.theta_sweep_B);
  detail::read_field(j, "masses", where, out.masses);
  detail::read_field(j, "mass_sweep_theta", where, out.mass_sweep_theta);
  detail::read_field(j, "seed", where, out.seed);
  if (j.contains("variants")) {
    std::vector<std::string> names;
    detail::read_field(j, "variants", where, names);
    out.variants.clear();
    for (const auto& n : names) out.variants.push_back(scalar_variant_from_string(n));
  }
  if (j.contains("lemma1")) {
    const auto& arr = j.at("lemma1");
    if (!arr.is_array()) throw ConfigError("field 'theory.lemma1' must be an array");
    out.lemma1.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string w = where + ".lemma1[" + std::to_string(i) + "]";
      detail::require_object(arr[i], w);
      detail::reject_unknown_keys(arr[i], {"n", "k", "margin", "min_probability"}, w);
      Lemma1Case lc;
      detail::require_field(arr[i], "n", w, lc.n);
      detail::require_field(arr[i], "k", w, lc.k);
      detail::require_field(arr[i], "margin", w, lc.margin);
      detail::read_field(arr[i], "min_probability", w, lc.min_probability);
      out.lemma1.push_back(lc);
    }
  }
  out.validate();
  c = out;
}

void to_json(nlohmann::json& j, const TheorySuiteReport& r) {
  j = nlohmann::json{{"status", r.status},
                     {"lambda_lower_bound", r.lambda_lower_bound},
                     {"certificates", r.certificates},
                     {"lemma1", r.lemma1}};
  if (!r.reason.empty()) j["reason"] = r.reason;
}

}  // namespace maglab
