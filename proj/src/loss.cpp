#include "maglab/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

void check_inputs(const FeatureBatch& batch, const ClassHead& head) {
  if (head.classes() < 2) {
    throw ConfigError("loss: at least two classes are required (inter-class sum would be empty)");
  }
  if (batch.dim() != head.dim()) throw ConfigError("loss: feature and head dimensions differ");
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.size()) {
    throw ConfigError("loss: label count does not match batch size");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= head.classes()) throw ConfigError("loss: label out of range");
  }
}

// Fixed-order scalar loops: a row's result must not depend on its position in
// the matrix (vectorized reductions change summation order with alignment).
double dot(const double* x, const double* y, Eigen::Index d) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) acc += x[k] * y[k];
  return acc;
}

Vector row_norms(const Matrix& m, const char* what) {
  Vector norms(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    norms[i] = std::sqrt(dot(m.row(i).data(), m.row(i).data(), m.cols()));
  }
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) {
      throw DomainError(std::string("cosine_logits: zero-norm ") + what + " row " +
                        std::to_string(i));
    }
  }
  return norms;
}

struct TargetLogit {
  double value;
  double d_cos;     // dz/dcos(theta_y)
  double d_margin;  // dz/dm
  bool fallback;
};

TargetLogit target_logit(MarginKind kind, double s, double c, double m) {
  if (kind == MarginKind::kCosine) return {s * (c - m), s, -s, false};
  const double cos_m = std::cos(m);
  const double sin_m = std::sin(m);
  if (c >= -cos_m) {
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {s * (c * cos_m - sin_t * sin_m), s * (cos_m + sin_m * c / sin_t),
            -s * (sin_t * cos_m + c * sin_m), false};
  }
  return {s * (c - m * sin_m), s, -s * (sin_m + m * cos_m), true};
}

}  // namespace

LossSpec LossSpec::magface(const MagParams& p) {
  p.validate();
  return {MarginKind::kAngular, p.s, 0.0, p};
}

LossSpec LossSpec::magcosface(const MagParams& p) {
  p.validate();
  return {MarginKind::kCosine, p.s, 0.0, p};
}

LossSpec LossSpec::arcface(double s, double m) { return {MarginKind::kAngular, s, m, std::nullopt}; }

LossSpec LossSpec::cosface(double s, double m) { return {MarginKind::kCosine, s, m, std::nullopt}; }

LossSpec LossSpec::normalized_softmax(double s) { return arcface(s, 0.0); }

int LossBreakdown::fallback_count() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(),
                                        [](const SampleLoss& r) { return r.fallback; }));
}

Matrix cosine_logits(const FeatureBatch& batch, const ClassHead& head) {
  if (batch.dim() != head.dim()) throw ConfigError("cosine_logits: dimensions differ");
  const Vector fn = row_norms(batch.values, "feature");
  const Vector wn = row_norms(head.weights, "head");
  Matrix cos(batch.size(), head.classes());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    for (Eigen::Index j = 0; j < head.classes(); ++j) {
      const double c = dot(batch.values.row(i).data(), head.weights.row(j).data(), batch.dim()) /
                       (fn[i] * wn[j]);
      cos(i, j) = std::clamp(c, -1.0 + kCosineEpsilon, 1.0 - kCosineEpsilon);
    }
  }
  return cos;
}

LossBreakdown evaluate_loss(const FeatureBatch& batch, const ClassHead& head, const LossSpec& spec,
                            bool with_gradients) {
  check_inputs(batch, head);
  if (!(spec.s > 0.0)) throw ConfigError("loss: scale s must be positive");
  if (!spec.mag && !(spec.constant_margin >= 0.0 && spec.constant_margin <= std::numbers::pi)) {
    throw ConfigError("loss: constant margin must lie in [0, pi]");
  }

  const Eigen::Index N = batch.size();
  const Eigen::Index n = head.classes();
  const double s = spec.s;
  const double lo = -1.0 + kCosineEpsilon;
  const double hi = 1.0 - kCosineEpsilon;

  const Vector fnorm = row_norms(batch.values, "feature");
  const Vector wnorm = row_norms(head.weights, "head");
  const Matrix unit_f = fnorm.cwiseInverse().asDiagonal() * batch.values;
  const Matrix unit_w = wnorm.cwiseInverse().asDiagonal() * head.weights;
  Matrix raw(N, n);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      raw(i, j) = dot(unit_f.row(i).data(), unit_w.row(j).data(), batch.dim());
    }
  }

  LossBreakdown out;
  out.samples.resize(static_cast<std::size_t>(N));
  Matrix grad_cos;  // dL_i/dcos_ij (zero where the cosine clamp is active)
  Vector grad_mag;  // dL_i/da_i through margin and regularizer
  if (with_gradients) {
    grad_cos = Matrix::Zero(N, n);
    grad_mag = Vector::Zero(N);
  }

  Vector logits(n);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    const double a = fnorm[i];
    SampleLoss& rec = out.samples[static_cast<std::size_t>(i)];

    double m = spec.constant_margin;
    double dm_da = 0.0;
    double reg = 0.0;
    double dreg_da = 0.0;
    if (spec.mag) {
      const MagParams& p = *spec.mag;
      const double ac = p.clamp_magnitude(a);
      m = margin(a, p);
      dm_da = margin_deriv(a, p);
      reg = p.lambda_g * regularizer(ac, p);
      if (a > p.l_a && a < p.u_a) dreg_da = p.lambda_g * regularizer_deriv(a, p);
    }

    const double cy = std::clamp(raw(i, y), lo, hi);
    const TargetLogit z = target_logit(spec.kind, s, cy, m);

    double b_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == y) {
        logits[j] = z.value;
      } else {
        logits[j] = s * std::clamp(raw(i, j), lo, hi);
        b_sum += std::exp(logits[j]);
      }
    }
    const double mx = logits.maxCoeff();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) denom += std::exp(logits[j] - mx);
    const double cls = mx + std::log(denom) - z.value;

    rec.magnitude = a;
    rec.cos_theta_y = cy;
    rec.margin_applied = m;
    rec.A_term = z.value;
    rec.B_term = b_sum;
    rec.reg_term = reg;
    rec.loss = cls + reg;
    rec.fallback = z.fallback;

    if (with_gradients) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double r = raw(i, j);
        if (r <= lo || r >= hi) continue;
        const double prob = std::exp(logits[j] - mx) / denom;
        grad_cos(i, j) = (j == y) ? (prob - 1.0) * z.d_cos : prob * s;
      }
      const double p_y = std::exp(z.value - mx) / denom;
      grad_mag[i] = (p_y - 1.0) * z.d_margin * dm_da + dreg_da;
    }
  }

  double total = 0.0;
  for (const auto& rec : out.samples) total += rec.loss;
  out.batch_mean = total / static_cast<double>(N);

  if (with_gradients) {
    const double inv_n = 1.0 / static_cast<double>(N);
    // d cos_ij / d f_i = (w^_j - cos_ij u_i) / a_i ; d a_i / d f_i = u_i
    const Vector radial = grad_cos.cwiseProduct(raw).rowwise().sum();
    out.grad_features = fnorm.cwiseInverse().asDiagonal() *
                            (grad_cos * unit_w - radial.asDiagonal() * unit_f) +
                        grad_mag.asDiagonal() * unit_f;
    out.grad_features *= inv_n;
    // d cos_ij / d w_j = (u_i - cos_ij w^_j) / |w_j|
    const Vector radial_w = grad_cos.cwiseProduct(raw).colwise().sum().transpose();
    out.grad_head = wnorm.cwiseInverse().asDiagonal() *
                    (grad_cos.transpose() * unit_f - radial_w.asDiagonal() * unit_w);
    out.grad_head *= inv_n;
  }
  return out;
}

LossBreakdown magface_forward(const FeatureBatch& batch, const ClassHead& head, const MagParams& p) {
  return evaluate_loss(batch, head, LossSpec::magface(p), false);
}

LossBreakdown magface_backward(const FeatureBatch& batch, const ClassHead& head,
                               const MagParams& p) {
  return evaluate_loss(batch, head, LossSpec::magface(p), true);
}

LossBreakdown magcosface_forward(const FeatureBatch& batch, const ClassHead& head,
                                 const MagParams& p) {
  return evaluate_loss(batch, head, LossSpec::magcosface(p), false);
}

LossBreakdown magcosface_backward(const FeatureBatch& batch, const ClassHead& head,
                                  const MagParams& p) {
  return evaluate_loss(batch, head, LossSpec::magcosface(p), true);
}

LossBreakdown arcface_forward(const FeatureBatch& batch, const ClassHead& head, double s,
                              double m) {
  return evaluate_loss(batch, head, LossSpec::arcface(s, m), false);
}

LossBreakdown arcface_backward(const FeatureBatch& batch, const ClassHead& head, double s,
                               double m) {
  return evaluate_loss(batch, head, LossSpec::arcface(s, m), true);
}

LossBreakdown cosface_forward(const FeatureBatch& batch, const ClassHead& head, double s,
                              double m) {
  return evaluate_loss(batch, head, LossSpec::cosface(s, m), false);
}

LossBreakdown cosface_backward(const FeatureBatch& batch, const ClassHead& head, double s,
                               double m) {
  return evaluate_loss(batch, head, LossSpec::cosface(s, m), true);
}

FiniteDiffGradient finite_diff_grad(const BatchLossFn& loss_fn, const FeatureBatch& batch,
                                    const ClassHead& head, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step must be positive");
  FiniteDiffGradient out;
  out.grad_features = Matrix::Zero(batch.values.rows(), batch.values.cols());
  out.grad_head = Matrix::Zero(head.weights.rows(), head.weights.cols());

  FeatureBatch fb = batch;
  for (Eigen::Index i = 0; i < fb.values.rows(); ++i) {
    for (Eigen::Index k = 0; k < fb.values.cols(); ++k) {
      const double x = fb.values(i, k);
      fb.values(i, k) = x + h;
      const double up = loss_fn(fb, head);
      fb.values(i, k) = x - h;
      const double down = loss_fn(fb, head);
      fb.values(i, k) = x;
      out.grad_features(i, k) = (up - down) / (2.0 * h);
    }
  }
  ClassHead hd = head;
  for (Eigen::Index j = 0; j < hd.weights.rows(); ++j) {
    for (Eigen::Index k = 0; k < hd.weights.cols(); ++k) {
      const double x = hd.weights(j, k);
      hd.weights(j, k) = x + h;
      const double up = loss_fn(batch, hd);
      hd.weights(j, k) = x - h;
      const double down = loss_fn(batch, hd);
      hd.weights(j, k) = x;
      out.grad_head(j, k) = (up - down) / (2.0 * h);
    }
  }
  return out;
}

}  // namespace maglab
