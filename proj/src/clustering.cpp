#include "maglab/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

Matrix unit_rows(const Matrix& m, const char* who) {
  if (m.rows() == 0) throw DomainError(std::string(who) + ": no embeddings");
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw DomainError(std::string(who) + ": zero or non-finite row " + std::to_string(i));
    }
    out.row(i) = m.row(i) / n;
  }
  return out;
}

Matrix cosine_distances(const Matrix& unit) {
  Matrix d = -(unit * unit.transpose());
  d.array() += 1.0;
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

void relabel(ClusteringResult& r) {
  std::map<int, int> ids;
  for (int& a : r.assignment) {
    if (a < 0) continue;
    auto [it, inserted] = ids.try_emplace(a, static_cast<int>(ids.size()));
    a = it->second;
  }
  r.n_clusters = static_cast<int>(ids.size());
}

// Noise points become fresh singleton ids so they never share a cluster.
std::vector<int> expand_noise(std::span<const int> v) {
  std::vector<int> out(v.begin(), v.end());
  int next = 0;
  for (int x : v) next = std::max(next, x + 1);
  for (int& x : out) {
    if (x < 0) x = next++;
  }
  return out;
}

void check_lengths(std::span<const int> a, std::span<const int> b, const char* who) {
  if (a.size() != b.size()) throw DomainError(std::string(who) + ": length mismatch");
  if (a.empty()) throw DomainError(std::string(who) + ": empty assignment");
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

ClusteringResult kmeans(const Matrix& embeddings, int k, std::uint64_t seed) {
  const Matrix x = unit_rows(embeddings, "kmeans");
  const Eigen::Index n = x.rows();
  if (k < 1 || k > n) throw DomainError("kmeans: k must lie in [1, number of embeddings]");

  std::mt19937_64 rng(seed);
  Matrix centers(k, x.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centers.row(0) = x.row(pick);
  chosen[pick] = true;
  Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc >= target) break;
      }
    }
    if (pick < 0) {
      // every point coincides with a center already; take the first unused row
      pick = std::find(chosen.begin(), chosen.end(), false) - chosen.begin();
    }
    chosen[pick] = true;
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  ClusteringResult out;
  out.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < kKMeansMaxIterations; ++it) {
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out.assignment[i] = best;
      objective += best_d;
    }
    out.objective_history.push_back(objective);

    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.assignment[i]) += x.row(i);
      ++counts[out.assignment[i]];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      const Vector next = sums.row(c).transpose() / counts[c];
      shift = std::max(shift, (next.transpose() - centers.row(c)).norm());
      centers.row(c) = next.transpose();
    }
    if (shift < kKMeansTolerance) break;
  }
  relabel(out);
  return out;
}

ClusteringResult ahc(const Matrix& embeddings, int k) {
  const Matrix x = unit_rows(embeddings, "ahc");
  const int n = static_cast<int>(x.rows());
  if (k < 1 || k > n) throw DomainError("ahc: k must lie in [1, number of embeddings]");

  Matrix d = cosine_distances(x);
  std::vector<int> size(n, 1);
  std::vector<bool> active(n, true);
  struct Merge {
    int a, b;
    double height;
  };
  std::vector<Merge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);

  // nearest-neighbour chain; valid because average linkage is reducible
  std::vector<int> chain;
  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      chain.push_back(static_cast<int>(std::find(active.begin(), active.end(), true) - active.begin()));
    }
    const int a = chain.back();
    const int prev = chain.size() > 1 ? chain[chain.size() - 2] : -1;
    int b = prev;
    double best = prev >= 0 ? d(a, prev) : std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (!active[j] || j == a) continue;
      if (d(a, j) < best) {
        best = d(a, j);
        b = j;
      }
    }
    if (b != prev) {
      chain.push_back(b);
      continue;
    }
    chain.pop_back();
    chain.pop_back();
    const int keep = std::min(a, b);
    const int gone = std::max(a, b);
    merges.push_back({keep, gone, best});
    const double wa = size[keep], wb = size[gone];
    for (int j = 0; j < n; ++j) {
      if (!active[j] || j == keep || j == gone) continue;
      const double v = (wa * d(keep, j) + wb * d(gone, j)) / (wa + wb);
      d(keep, j) = v;
      d(j, keep) = v;
    }
    size[keep] += size[gone];
    active[gone] = false;
    --remaining;
  }

  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& l, const Merge& r) { return l.height < r.height; });
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n - k; ++i) {
    const int ra = find_root(parent, merges[i].a);
    const int rb = find_root(parent, merges[i].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  ClusteringResult out;
  out.assignment.resize(n);
  for (int i = 0; i < n; ++i) out.assignment[i] = find_root(parent, i);
  relabel(out);
  return out;
}

ClusteringResult dbscan(const Matrix& embeddings, double eps, int min_pts) {
  const Matrix x = unit_rows(embeddings, "dbscan");
  if (!(eps >= 0.0)) throw DomainError("dbscan: eps must be nonnegative");
  if (min_pts < 1) throw DomainError("dbscan: min_pts must be positive");
  const int n = static_cast<int>(x.rows());
  const Matrix d = cosine_distances(x);

  std::vector<std::vector<int>> nbrs(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (d(i, j) <= eps) nbrs[i].push_back(j);
    }
  }
  constexpr int kUnvisited = -2;
  ClusteringResult out;
  out.assignment.assign(n, kUnvisited);
  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (out.assignment[i] != kUnvisited) continue;
    if (static_cast<int>(nbrs[i].size()) < min_pts) {
      out.assignment[i] = -1;
      continue;
    }
    out.assignment[i] = cluster;
    std::vector<int> frontier(nbrs[i].begin(), nbrs[i].end());
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const int j = frontier[f];
      if (out.assignment[j] == -1) out.assignment[j] = cluster;  // border point
      if (out.assignment[j] != kUnvisited) continue;
      out.assignment[j] = cluster;
      if (static_cast<int>(nbrs[j].size()) >= min_pts) {
        frontier.insert(frontier.end(), nbrs[j].begin(), nbrs[j].end());
      }
    }
    ++cluster;
  }
  relabel(out);
  return out;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  check_lengths(a, b, "nmi");
  const std::vector<int> x = expand_noise(a);
  const std::vector<int> y = expand_noise(b);
  const double n = static_cast<double>(x.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ca[x[i]] += 1.0;
    cb[y[i]] += 1.0;
    joint[{x[i], y[i]}] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& c) {
    double h = 0.0;
    for (const auto& [_, v] : c) h -= (v / n) * std::log(v / n);
    return h;
  };
  const double ha = entropy(ca);
  const double hb = entropy(cb);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, v] : joint) {
    mi += (v / n) * std::log(v * n / (ca[key.first] * cb[key.second]));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

BCubedScore bcubed_f(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth, "bcubed_f");
  const std::vector<int> p = expand_noise(pred);
  const std::vector<int> t = expand_noise(truth);
  std::map<int, double> cp, ct;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp[p[i]] += 1.0;
    ct[t[i]] += 1.0;
    joint[{p[i], t[i]}] += 1.0;
  }
  double prec = 0.0, rec = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double both = joint[{p[i], t[i]}];
    prec += both / cp[p[i]];
    rec += both / ct[t[i]];
  }
  BCubedScore out;
  out.precision = prec / static_cast<double>(p.size());
  out.recall = rec / static_cast<double>(p.size());
  out.f = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

}  // namespace maglab
