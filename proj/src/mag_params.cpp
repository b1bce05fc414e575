#include "maglab/mag_params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"

namespace maglab {

void MagParams::validate() const {
  for (double v : {s, l_a, u_a, l_m, u_m, lambda_g}) {
    if (!std::isfinite(v)) throw ConfigError("MagParams: non-finite field");
  }
  if (!(s > 0.0)) throw ConfigError("MagParams: s must be positive");
  if (!(l_a > 0.0 && l_a < u_a)) throw ConfigError("MagParams: require 0 < l_a < u_a");
  if (!(l_m >= 0.0 && l_m < u_m && u_m <= std::numbers::pi)) {
    throw ConfigError("MagParams: require 0 <= l_m < u_m <= pi");
  }
  if (lambda_g < 0.0) throw ConfigError("MagParams: lambda_g must be nonnegative");
}

double MagParams::clamp_magnitude(double a) const { return std::clamp(a, l_a, u_a); }

bool MagParams::guarantees_hold() const {
  return lambda_g >= lambda_lower_bound(*this) && u_m <= std::numbers::pi / 2.0;
}

bool MagParams::lambda_below_bound() const { return lambda_g < lambda_lower_bound(*this); }

double margin(double a, const MagParams& p) {
  return p.slope() * (p.clamp_magnitude(a) - p.l_a) + p.l_m;
}

double margin_deriv(double a, const MagParams& p) {
  return (a > p.l_a && a < p.u_a) ? p.slope() : 0.0;
}

double regularizer(double a, const MagParams& p) {
  if (!(a > 0.0)) throw DomainError("regularizer: magnitude must be positive");
  return 1.0 / a + a / (p.u_a * p.u_a);
}

double regularizer_deriv(double a, const MagParams& p) {
  if (!(a > 0.0)) throw DomainError("regularizer_deriv: magnitude must be positive");
  return -1.0 / (a * a) + 1.0 / (p.u_a * p.u_a);
}

double lambda_lower_bound(const MagParams& p) {
  const double ua2 = p.u_a * p.u_a;
  const double la2 = p.l_a * p.l_a;
  return p.s * ua2 * la2 / (ua2 - la2) * p.slope();
}

void to_json(nlohmann::json& j, const MagParams& p) {
  j = nlohmann::json{{"s", p.s},     {"l_a", p.l_a}, {"u_a", p.u_a},
                     {"l_m", p.l_m}, {"u_m", p.u_m}, {"lambda_g", p.lambda_g}};
}

void from_json(const nlohmann::json& j, MagParams& p) {
  static const std::set<std::string> kKeys = {"s", "l_a", "u_a", "l_m", "u_m", "lambda_g"};
  if (!j.is_object()) throw ConfigError("MagParams: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("MagParams: unknown field '" + key + "'");
    if (!value.is_number()) throw ConfigError("MagParams: field '" + key + "' must be a number");
  }
  for (const auto& key : kKeys) {
    if (!j.contains(key)) throw ConfigError("MagParams: missing field '" + key + "'");
  }
  MagParams out;
  out.s = j.at("s").get<double>();
  out.l_a = j.at("l_a").get<double>();
  out.u_a = j.at("u_a").get<double>();
  out.l_m = j.at("l_m").get<double>();
  out.u_m = j.at("u_m").get<double>();
  out.lambda_g = j.at("lambda_g").get<double>();
  out.validate();
  p = out;
}

}  // namespace maglab
