#pragma once

#include <cstdint>
#include <vector>

#include "maglab/loss.hpp"

namespace maglab {

struct SyntheticSpec {
  int n_classes = 8;
  int dim_input = 32;
  int dim_embed = 16;
  int samples_per_class = 200;
  double quality_noise_max = 1.2;  // radians
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledSample {
  Vector input;
  int label = 0;
  double true_quality = 1.0;  // angular noise is (1 - q) * quality_noise_max
};

// Unit-norm class prototypes (n_classes x dim_input), drawn uniformly on the sphere.
Matrix class_prototypes(const SyntheticSpec& spec);

// Each sample is its class prototype rotated by (1 - q) * quality_noise_max in a
// random tangent direction, q ~ U[0, 1]. Split 0 is the training set; other split
// indices share the prototypes but draw fresh samples. Samples are ordered by class.
std::vector<LabeledSample> generate_split(const SyntheticSpec& spec, std::uint64_t split);

inline std::vector<LabeledSample> generate_dataset(const SyntheticSpec& spec) {
  return generate_split(spec, 0);
}

// Inputs stacked as rows.
Matrix stack_inputs(const std::vector<LabeledSample>& samples);

}  // namespace maglab
