#include "maglab/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_scores(std::span<const double> scores, const char* what) {
  if (scores.empty()) throw DomainError(std::string("fnmr_at_fmr: empty ") + what + " list");
  for (double v : scores) {
    if (!std::isfinite(v)) throw DomainError(std::string("fnmr_at_fmr: non-finite ") + what + " score");
  }
}

// Relative size below which a sum of unit-scale terms counts as cancelled.
constexpr double kCancelTolerance = 1e-12;

Vector normalized_sum(const Matrix& features, bool unit_terms) {
  if (features.rows() == 0) throw DomainError("aggregate: empty feature list");
  Vector sum = Vector::Zero(features.cols());
  double scale = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double n = features.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("aggregate: zero or non-finite feature");
    if (unit_terms) {
      sum += features.row(i).transpose() / n;
      scale += 1.0;
    } else {
      sum += features.row(i).transpose();
      scale += n;
    }
  }
  const double norm = sum.norm();
  if (!(norm > kCancelTolerance * scale)) {
    throw AggregationError("aggregate: features cancel, aggregated direction is undefined");
  }
  return sum / norm;
}

}  // namespace

double cosine_score(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DomainError("cosine_score: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_score: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ThresholdResult fnmr_at_fmr(std::span<const double> genuine, std::span<const double> impostor,
                            double fmr_target) {
  check_scores(genuine, "genuine");
  check_scores(impostor, "impostor");
  if (!(fmr_target > 0.0 && fmr_target <= 1.0)) {
    throw DomainError("fnmr_at_fmr: target must lie in (0, 1]");
  }
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(imp.begin(), imp.end());
  const double n_imp = static_cast<double>(imp.size());

  // zero impostors accepted: just above the largest impostor score
  double threshold = std::nextafter(imp.back(), kInf);
  if (1.0 <= fmr_target) {
    threshold = -kInf;
  } else {
    // candidates ascending; #(imp >= t) is nonincreasing in t
    for (std::size_t i = 0; i < imp.size(); ++i) {
      if (i > 0 && imp[i] == imp[i - 1]) continue;
      const double above = static_cast<double>(imp.size() - i);
      if (above / n_imp <= fmr_target) {
        threshold = imp[i];
        break;
      }
    }
  }
  const auto rejected = std::count_if(genuine.begin(), genuine.end(),
                                      [threshold](double g) { return g < threshold; });
  return {threshold, static_cast<double>(rejected) / static_cast<double>(genuine.size())};
}

double tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                  double far_target) {
  return 1.0 - fnmr_at_fmr(genuine, impostor, far_target).fnmr;
}

int PairProtocol::genuine_count() const {
  return static_cast<int>(
      std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.genuine; }));
}

int PairProtocol::impostor_count() const {
  return static_cast<int>(pairs.size()) - genuine_count();
}

PairProtocol all_pairs_protocol(std::span<const int> labels) {
  PairProtocol out;
  const int n = static_cast<int>(labels.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) out.pairs.push_back({i, j, labels[i] == labels[j]});
  }
  return out;
}

PairScores score_pairs(const PairProtocol& protocol, const Matrix& embeddings,
                       const std::vector<bool>* keep) {
  const Eigen::Index m = embeddings.rows();
  Vector norms(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    norms[i] = embeddings.row(i).norm();
    if (!(norms[i] > 0.0)) throw DomainError("score_pairs: zero embedding row " + std::to_string(i));
  }
  PairScores out;
  for (const auto& p : protocol.pairs) {
    if (p.a < 0 || p.b < 0 || p.a >= m || p.b >= m) {
      throw DomainError("score_pairs: pair index out of range");
    }
    if (keep && (!(*keep)[p.a] || !(*keep)[p.b])) continue;
    const double s = std::clamp(embeddings.row(p.a).dot(embeddings.row(p.b)) / (norms[p.a] * norms[p.b]),
                                -1.0, 1.0);
    (p.genuine ? out.genuine : out.impostor).push_back(s);
  }
  return out;
}

RejectCurve error_versus_reject(const PairProtocol& protocol, const Matrix& embeddings,
                                std::span<const double> qualities,
                                std::span<const double> fractions, double fmr_target) {
  const auto m = static_cast<std::size_t>(embeddings.rows());
  if (qualities.size() != m) throw DomainError("error_versus_reject: one quality per embedding required");
  for (double q : qualities) {
    if (!std::isfinite(q)) throw DomainError("error_versus_reject: non-finite quality");
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0)) {
      throw DomainError("error_versus_reject: fractions must lie in [0, 1)");
    }
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw DomainError("error_versus_reject: fractions must be strictly ascending");
    }
  }
  if (!(fmr_target > 0.0 && fmr_target <= 1.0)) {
    throw DomainError("error_versus_reject: target must lie in (0, 1]");
  }

  std::vector<double> sorted(qualities.begin(), qualities.end());
  std::sort(sorted.begin(), sorted.end());

  RejectCurve curve;
  curve.fmr_target = fmr_target;
  for (double r : fractions) {
    const auto k = static_cast<std::size_t>(std::floor(r * static_cast<double>(m)));
    std::vector<bool> keep(m, true);
    int dropped = 0;
    if (k > 0) {
      const double cut = sorted[k - 1];
      const bool straddles = k < m && sorted[k] == cut;
      for (std::size_t i = 0; i < m; ++i) {
        if (qualities[i] < cut || (!straddles && qualities[i] == cut)) {
          keep[i] = false;
          ++dropped;
        }
      }
    }
    const PairScores sc = score_pairs(protocol, embeddings, &keep);
    curve.reject_fractions.push_back(r);
    curve.rejected.push_back(dropped);
    if (sc.genuine.empty() || sc.impostor.empty()) {
      curve.valid.push_back(false);
      curve.fnmr_values.push_back(std::numeric_limits<double>::quiet_NaN());
      curve.thresholds.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const ThresholdResult t = fnmr_at_fmr(sc.genuine, sc.impostor, fmr_target);
    curve.valid.push_back(true);
    curve.fnmr_values.push_back(t.fnmr);
    curve.thresholds.push_back(t.threshold);
  }
  return curve;
}

Vector aggregate_mean(const Matrix& features) { return normalized_sum(features, true); }

Vector aggregate_magface_plus(const Matrix& features) { return normalized_sum(features, false); }

TemplateSet make_templates(std::span<const int> labels, int per_template) {
  if (per_template < 1) throw DomainError("make_templates: per_template must be positive");
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(static_cast<int>(i));
  TemplateSet out;
  for (const auto& [label, rows] : by_label) {
    for (std::size_t start = 0; start + per_template <= rows.size(); start += per_template) {
      out.members.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(start),
                               rows.begin() + static_cast<std::ptrdiff_t>(start + per_template));
      out.labels.push_back(label);
    }
  }
  return out;
}

Matrix aggregate_templates(const Matrix& embeddings, const TemplateSet& templates,
                           AggregationRule rule) {
  Matrix out(static_cast<Eigen::Index>(templates.members.size()), embeddings.cols());
  for (std::size_t t = 0; t < templates.members.size(); ++t) {
    const auto& rows = templates.members[t];
    Matrix group(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= embeddings.rows()) {
        throw DomainError("aggregate_templates: member index out of range");
      }
      group.row(static_cast<Eigen::Index>(r)) = embeddings.row(rows[r]);
    }
    out.row(static_cast<Eigen::Index>(t)) =
        (rule == AggregationRule::kMean ? aggregate_mean(group) : aggregate_magface_plus(group))
            .transpose();
  }
  return out;
}

double template_tar_at_far(const Matrix& embeddings, const TemplateSet& templates,
                           AggregationRule rule, double far_target) {
  const Matrix agg = aggregate_templates(embeddings, templates, rule);
  const PairScores sc = score_pairs(all_pairs_protocol(templates.labels), agg);
  return tar_at_far(sc.genuine, sc.impostor, far_target);
}

}  // namespace maglab
