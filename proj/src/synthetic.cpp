#include "maglab/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "maglab/errors.hpp"
#include "maglab/seeds.hpp"

namespace maglab {

namespace {

constexpr std::uint64_t kPrototypeStream = 1;
constexpr std::uint64_t kSampleStream = 2;

Vector gaussian_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(dim);
  for (int k = 0; k < dim; ++k) v[k] = g(rng);
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw ConfigError("SyntheticSpec: n_classes must be >= 2");
  if (dim_input < 2 || dim_embed < 2) throw ConfigError("SyntheticSpec: dimensions must be >= 2");
  if (samples_per_class < 1) throw ConfigError("SyntheticSpec: samples_per_class must be >= 1");
  if (!(quality_noise_max >= 0.0 && quality_noise_max <= std::numbers::pi / 2.0)) {
    throw ConfigError("SyntheticSpec: quality_noise_max must lie in [0, pi/2]");
  }
}

Matrix class_prototypes(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, kPrototypeStream));
  Matrix protos(spec.n_classes, spec.dim_input);
  for (int c = 0; c < spec.n_classes; ++c) {
    Vector v = gaussian_vector(rng, spec.dim_input);
    protos.row(c) = v.normalized().transpose();
  }
  return protos;
}

std::vector<LabeledSample> generate_split(const SyntheticSpec& spec, std::uint64_t split) {
  const Matrix protos = class_prototypes(spec);
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(spec.n_classes) * spec.samples_per_class);
  for (int c = 0; c < spec.n_classes; ++c) {
    // per-class stream so classes can be generated independently
    std::mt19937_64 rng(derive_seed(spec.seed, kSampleStream, split * 1000003ull + c));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vector proto = protos.row(c).transpose();
    for (int k = 0; k < spec.samples_per_class; ++k) {
      const double q = unit(rng);
      const double angle = (1.0 - q) * spec.quality_noise_max;
      Vector tangent = gaussian_vector(rng, spec.dim_input);
      tangent -= tangent.dot(proto) * proto;
      tangent.normalize();
      LabeledSample s;
      s.input = std::cos(angle) * proto + std::sin(angle) * tangent;
      s.label = c;
      s.true_quality = q;
      out.push_back(std::move(s));
    }
  }
  return out;
}

Matrix stack_inputs(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(samples.size()), samples.front().input.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = samples[i].input.transpose();
  }
  return m;
}

}  // namespace maglab
