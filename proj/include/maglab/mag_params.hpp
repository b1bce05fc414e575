#pragma once

#include <nlohmann/json.hpp>

namespace maglab {

// Hyperparameters of the magnitude-aware margin loss family.
//
// Feature magnitudes live in [l_a, u_a]; the margin grows linearly from l_m at
// l_a to u_m at u_a, and the regularizer g(a) = 1/a + a/u_a^2 is minimized at u_a.
struct MagParams {
  double s = 64.0;
  double l_a = 10.0;
  double u_a = 110.0;
  double l_m = 0.40;
  double u_m = 0.80;
  double lambda_g = 35.0;

  // Throws ConfigError unless 0 < l_a < u_a, 0 <= l_m < u_m <= pi, s > 0,
  // lambda_g >= 0 and every field is finite.
  void validate() const;

  // Slope K of the linear margin.
  double slope() const { return (u_m - l_m) / (u_a - l_a); }

  double clamp_magnitude(double a) const;

  // lambda_g meets the lower bound and u_m <= pi/2.
  bool guarantees_hold() const;

  // lambda_g is below lambda_lower_bound(); constructible, but outside the
  // regime where the convexity and monotonicity results apply.
  bool lambda_below_bound() const;

  bool operator==(const MagParams&) const = default;
};

// m(a) evaluated on clamp(a, l_a, u_a).
double margin(double a, const MagParams& p);

// K strictly inside (l_a, u_a), 0 at or outside the bounds.
double margin_deriv(double a, const MagParams& p);

// g(a) = 1/a + a/u_a^2. Throws DomainError for a <= 0.
double regularizer(double a, const MagParams& p);

// g'(a) = -1/a^2 + 1/u_a^2. Throws DomainError for a <= 0.
double regularizer_deriv(double a, const MagParams& p);

// Smallest lambda_g for which the derivative of the per-sample loss is
// negative at l_a: s*u_a^2*l_a^2/(u_a^2 - l_a^2) * K.
double lambda_lower_bound(const MagParams& p);

void to_json(nlohmann::json& j, const MagParams& p);
// Requires exactly the keys s, l_a, u_a, l_m, u_m, lambda_g; validates.
void from_json(const nlohmann::json& j, MagParams& p);

}  // namespace maglab
