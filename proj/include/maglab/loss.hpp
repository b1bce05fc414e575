#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "maglab/mag_params.hpp"

namespace maglab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Clamp applied to every cosine so the angle-addition form stays differentiable.
inline constexpr double kCosineEpsilon = 1e-7;

// N unnormalized embeddings (one per row) with their class labels.
struct FeatureBatch {
  Matrix values;
  std::vector<int> labels;

  Eigen::Index size() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

// n class centers, one per row. Rows are renormalized inside every forward pass.
struct ClassHead {
  Matrix weights;

  Eigen::Index classes() const { return weights.rows(); }
  Eigen::Index dim() const { return weights.cols(); }
};

// How the margin enters the target logit.
enum class MarginKind {
  kAngular,   // s * cos(theta_y + m)
  kCosine,    // s * (cos(theta_y) - m)
};

// A member of the loss family: margin form, scale, and either a constant margin
// or a magnitude-aware margin with regularizer.
struct LossSpec {
  MarginKind kind = MarginKind::kAngular;
  double s = 64.0;
  double constant_margin = 0.0;
  std::optional<MagParams> mag;  // set -> m(a_i) and lambda_g * g(a_i)

  static LossSpec magface(const MagParams& p);
  static LossSpec magcosface(const MagParams& p);
  static LossSpec arcface(double s, double m);
  static LossSpec cosface(double s, double m);
  static LossSpec normalized_softmax(double s);
};

struct SampleLoss {
  double magnitude = 0.0;
  double cos_theta_y = 0.0;
  double margin_applied = 0.0;
  double A_term = 0.0;    // target logit
  double B_term = 0.0;    // sum_{j != y} exp(s cos theta_j)
  double reg_term = 0.0;  // lambda_g * g(clamp(a))
  double loss = 0.0;
  bool fallback = false;  // theta_y + m > pi, linear extension used
};

struct LossBreakdown {
  std::vector<SampleLoss> samples;
  double batch_mean = 0.0;
  Matrix grad_features;  // empty for forward-only calls
  Matrix grad_head;

  int fallback_count() const;
};

// Entry (i, j) is the clamped cosine between row i of the batch and row j of the head.
Matrix cosine_logits(const FeatureBatch& batch, const ClassHead& head);

// Generic evaluation; the named entry points below forward here.
LossBreakdown evaluate_loss(const FeatureBatch& batch, const ClassHead& head, const LossSpec& spec,
                            bool with_gradients);

LossBreakdown magface_forward(const FeatureBatch& batch, const ClassHead& head, const MagParams& p);
LossBreakdown magface_backward(const FeatureBatch& batch, const ClassHead& head, const MagParams& p);
LossBreakdown magcosface_forward(const FeatureBatch& batch, const ClassHead& head,
                                 const MagParams& p);
LossBreakdown magcosface_backward(const FeatureBatch& batch, const ClassHead& head,
                                  const MagParams& p);
LossBreakdown arcface_forward(const FeatureBatch& batch, const ClassHead& head, double s, double m);
LossBreakdown arcface_backward(const FeatureBatch& batch, const ClassHead& head, double s, double m);
LossBreakdown cosface_forward(const FeatureBatch& batch, const ClassHead& head, double s, double m);
LossBreakdown cosface_backward(const FeatureBatch& batch, const ClassHead& head, double s, double m);

// Scalar batch loss as a function of features and head; used by the gradient oracle.
using BatchLossFn = std::function<double(const FeatureBatch&, const ClassHead&)>;

struct FiniteDiffGradient {
  Matrix grad_features;
  Matrix grad_head;
};

// Central differences (L(x+h) - L(x-h)) / 2h on every feature and head coordinate.
FiniteDiffGradient finite_diff_grad(const BatchLossFn& loss_fn, const FeatureBatch& batch,
                                    const ClassHead& head, double h);

}  // namespace maglab
