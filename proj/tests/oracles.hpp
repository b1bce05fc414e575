#pragma once

// Reference computations used only by the tests. Nothing here calls into the
// batched loss path; values are recomputed from plain loops and std:: math.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "maglab/loss.hpp"

namespace maglab::oracle {

enum class Target { kAngular, kCosine };

struct MarginModel {
  bool magnitude_aware = false;
  double constant = 0.0;
  double s = 64, l_a = 10, u_a = 110, l_m = 0.4, u_m = 0.8, lambda_g = 0;
};

// Per-sample loss written out from the definition, via acos and cos(theta + m).
inline double sample_loss(const std::vector<double>& f, const std::vector<std::vector<double>>& w,
                          int y, Target target, double s, const MarginModel& mm) {
  auto dot = [](const std::vector<double>& x, const std::vector<double>& z) {
    double acc = 0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * z[k];
    return acc;
  };
  const double a = std::sqrt(dot(f, f));
  const double ac = std::min(std::max(a, mm.l_a), mm.u_a);
  const double m = mm.magnitude_aware ? (mm.u_m - mm.l_m) / (mm.u_a - mm.l_a) * (ac - mm.l_a) + mm.l_m
                                      : mm.constant;
  const double reg = mm.magnitude_aware ? mm.lambda_g * (1.0 / ac + ac / (mm.u_a * mm.u_a)) : 0.0;
  double A = 0, B = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    double c = dot(f, w[j]) / (a * std::sqrt(dot(w[j], w[j])));
    c = std::min(std::max(c, -1.0 + 1e-7), 1.0 - 1e-7);
    if (static_cast<int>(j) == y) {
      const double theta = std::acos(c);
      if (target == Target::kCosine) {
        A = s * (c - m);
      } else if (theta + m <= std::numbers::pi) {
        A = s * std::cos(theta + m);
      } else {
        A = s * (c - m * std::sin(m));
      }
    } else {
      B += std::exp(s * c);
    }
  }
  return -std::log(std::exp(A) / (std::exp(A) + B)) + reg;
}

inline std::vector<double> row(const Matrix& m, Eigen::Index i) {
  return {m.row(i).data(), m.row(i).data() + m.cols()};
}

inline std::vector<std::vector<double>> rows(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(row(m, i));
  return out;
}

struct Instance {
  FeatureBatch batch;
  ClassHead head;
};

// Random batch with feature norms spread over [mag_lo, mag_hi].
inline Instance random_instance(std::mt19937_64& rng, int max_n_batch, int max_dim, int max_classes,
                                double mag_lo = 5.0, double mag_hi = 130.0) {
  std::uniform_int_distribution<int> nb(1, max_n_batch), dd(2, max_dim), nc(2, max_classes);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int N = nb(rng), d = dd(rng), n = nc(rng);
  Instance inst;
  inst.batch.values.resize(N, d);
  inst.head.weights.resize(n, d);
  // Head row norms in [2, 8]: the loss is scale-invariant in each row, and the
  // central-difference truncation error grows like (s * h / norm)^2.
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) inst.head.weights(j, k) = g(rng);
    inst.head.weights.row(j) *= (2.0 + 6.0 * u(rng)) / inst.head.weights.row(j).norm();
  }
  std::uniform_int_distribution<int> lab(0, n - 1);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < d; ++k) inst.batch.values(i, k) = g(rng);
    const double mag = mag_lo + (mag_hi - mag_lo) * u(rng);
    inst.batch.values.row(i) *= mag / inst.batch.values.row(i).norm();
    inst.batch.labels.push_back(lab(rng));
  }
  return inst;
}

// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], z = b.data()[i];
    worst = std::max(worst, std::abs(x - z) / std::max({std::abs(x), std::abs(z), floor}));
  }
  return worst;
}

// Brute-force grid argmin of a 1-D function on [lo, hi] with `points` samples.
template <class F>
double grid_argmin(F&& fn, double lo, double hi, int points) {
  double best_x = lo, best = fn(lo);
  const double step = (hi - lo) / (points - 1);
  for (int k = 1; k < points; ++k) {
    const double x = (k == points - 1) ? hi : lo + k * step;
    const double v = fn(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

// Exhaustive threshold sweep: every observed impostor score, the next double above
// the largest one, plus +/-inf.
inline std::pair<double, double> sweep_fnmr(const std::vector<double>& gen, const std::vector<double>& imp,
                                            double target) {
  std::vector<double> cands = imp;
  cands.push_back(-INFINITY);
  cands.push_back(INFINITY);
  cands.push_back(std::nextafter(*std::max_element(imp.begin(), imp.end()), INFINITY));
  std::sort(cands.begin(), cands.end());
  for (double t : cands) {
    double acc = 0;
    for (double v : imp) acc += (v >= t);
    if (acc / imp.size() <= target) {
      double rej = 0;
      for (double v : gen) rej += (v < t);
      return {t, rej / gen.size()};
    }
  }
  return {INFINITY, 1.0};
}

// NMI with arithmetic-mean normalization from an explicit contingency table.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  std::vector<int> aa = a, bb = b;
  int next = 1 << 20;
  for (auto& v : aa) if (v < 0) v = next++;
  for (auto& v : bb) if (v < 0) v = next++;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{aa[i], bb[i]}] += 1.0 / n;
    pa[aa[i]] += 1.0 / n;
    pb[bb[i]] += 1.0 / n;
  }
  double mi = 0, ha = 0, hb = 0;
  for (auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  for (auto& [k, p] : pa) ha -= p * std::log(p);
  for (auto& [k, p] : pb) hb -= p * std::log(p);
  if (ha + hb == 0) return 1.0;
  return mi / (0.5 * (ha + hb));
}

// Per-item BCubed by direct pair counting.
inline std::pair<double, double> bcubed(const std::vector<int>& pred, const std::vector<int>& truth) {
  const std::size_t n = pred.size();
  double p = 0, r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double same_cluster = 0, same_class = 0, both = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool c = (pred[i] >= 0 && pred[j] == pred[i]) || i == j;
      const bool t = truth[j] == truth[i];
      same_cluster += c;
      same_class += t;
      both += c && t;
    }
    p += both / same_cluster;
    r += both / same_class;
  }
  return {p / n, r / n};
}

}  // namespace maglab::oracle
