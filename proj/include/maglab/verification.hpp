#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maglab/loss.hpp"

namespace maglab {

// Normalized dot product; DomainError for a zero vector or a size mismatch.
double cosine_score(const Vector& a, const Vector& b);

struct ThresholdResult {
  double threshold = 0.0;  // -inf when every comparison is accepted
  double fnmr = 0.0;
};

// Smallest t among {-inf} U impostor scores U {next double above the largest impostor}
// with #(impostor >= t) / N <= target; fnmr = #(genuine < t) / N_gen. Equal scores
// always fall on the same side. DomainError for empty lists, non-finite scores or a
// target outside (0, 1].
ThresholdResult fnmr_at_fmr(std::span<const double> genuine, std::span<const double> impostor,
                            double fmr_target);

double tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                  double far_target);

struct VerificationPair {
  int a = 0;
  int b = 0;
  bool genuine = false;
};

struct PairProtocol {
  std::vector<VerificationPair> pairs;

  int genuine_count() const;
  int impostor_count() const;
};

// Every unordered pair i < j; genuine iff labels match.
PairProtocol all_pairs_protocol(std::span<const int> labels);

struct PairScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

// Cosine scores of the protocol pairs over embedding rows. Pairs with a false entry
// in `keep` (if given) are skipped.
PairScores score_pairs(const PairProtocol& protocol, const Matrix& embeddings,
                       const std::vector<bool>* keep = nullptr);

struct RejectCurve {
  std::vector<double> reject_fractions;
  std::vector<double> fnmr_values;  // NaN where invalid
  std::vector<double> thresholds;
  std::vector<bool> valid;          // false: no genuine or no impostor pair survived
  std::vector<int> rejected;        // embeddings actually dropped at each point
  double fmr_target = 0.0;
};

// For each fraction r drops the floor(r * M) lowest-quality embeddings and
// recomputes the threshold on the surviving pairs. A tie group straddling the cut
// is kept whole, so fewer than floor(r * M) may be dropped.
RejectCurve error_versus_reject(const PairProtocol& protocol, const Matrix& embeddings,
                                std::span<const double> qualities,
                                std::span<const double> fractions, double fmr_target);

// normalize(sum f_i / |f_i|)
Vector aggregate_mean(const Matrix& features);
// normalize(sum f_i)
Vector aggregate_magface_plus(const Matrix& features);

enum class AggregationRule { kMean, kMagFacePlus };

// Multi-sample templates: disjoint groups of rows sharing a label.
struct TemplateSet {
  std::vector<std::vector<int>> members;
  std::vector<int> labels;
};

// Splits each label's rows (in index order) into consecutive groups of `per_template`;
// a short tail group is dropped.
TemplateSet make_templates(std::span<const int> labels, int per_template);

// One aggregated unit vector per template, as rows.
Matrix aggregate_templates(const Matrix& embeddings, const TemplateSet& templates,
                           AggregationRule rule);

// TAR at the given FAR over all template pairs.
double template_tar_at_far(const Matrix& embeddings, const TemplateSet& templates,
                           AggregationRule rule, double far_target);

}  // namespace maglab
