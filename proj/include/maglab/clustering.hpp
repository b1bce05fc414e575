#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maglab/loss.hpp"

namespace maglab {

inline constexpr int kKMeansMaxIterations = 300;
inline constexpr double kKMeansTolerance = 1e-6;

struct ClusteringResult {
  std::vector<int> assignment;  // contiguous ids from 0 in order of first appearance, -1 = noise
  int n_clusters = 0;
  std::vector<double> objective_history;  // k-means only, one entry per assignment step
};

// k-means with k-means++ seeding on row-normalized inputs. DomainError for k < 1,
// k > rows, or a zero row.
ClusteringResult kmeans(const Matrix& embeddings, int k, std::uint64_t seed);

// Average-linkage agglomerative clustering on cosine distance, cut at k clusters.
ClusteringResult ahc(const Matrix& embeddings, int k);

// DBSCAN on cosine distance 1 - cos; a point is core when at least min_pts points
// (itself included) lie within eps.
ClusteringResult dbscan(const Matrix& embeddings, double eps, int min_pts);

// Mutual information over the arithmetic mean of the two entropies. Noise (-1) is
// treated as singleton clusters. Returns 1 when both sides are a single cluster.
double nmi(std::span<const int> a, std::span<const int> b);

struct BCubedScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Per-item BCubed averaged over items; noise in `pred` counts as singletons.
BCubedScore bcubed_f(std::span<const int> pred, std::span<const int> truth);

}  // namespace maglab
