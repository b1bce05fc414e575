// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "maglab/clustering.hpp"
#include "maglab/loss.hpp"
#include "maglab/mag_params.hpp"
#include "maglab/theory.hpp"
#include "maglab/theory_suite.hpp"
#include "maglab/trainer.hpp"
#include "maglab/verification.hpp"
#include "oracles.hpp"

using namespace maglab;

namespace {

constexpr std::uint64_t kAcceptanceSeed = 2024;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (dt >= limit_s) {
    o.pass = false;
    o.detail += " [over time limit]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s (%.2fs / limit %.0fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), dt,
              limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

MagParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MagParams p;
  p.s = 8.0 + 56.0 * u(rng);
  p.l_a = 10.0 + 10.0 * u(rng);
  p.u_a = p.l_a + 50.0 + 60.0 * u(rng);
  p.l_m = 0.5 * u(rng);
  p.u_m = p.l_m + 0.1 + 0.8 * u(rng);
  p.lambda_g = 50.0 * u(rng);
  return p;
}

// Shared by the quality-curve and aggregation criteria.
struct TrainedRun {
  SyntheticSpec spec;
  TrainReport magface;
  TrainReport softmax;
};

TrainedRun& trained() {
  static TrainedRun run = [] {
    TrainedRun r;
    r.spec.seed = kAcceptanceSeed;
    const auto ds = generate_dataset(r.spec);
    TrainConfig c;
    c.seed = kAcceptanceSeed;
    c.loss_variant = LossVariant::kMagFace;
    r.magface = train(ds, r.spec.dim_embed, c);
    c.loss_variant = LossVariant::kSoftmax;
    r.softmax = train(ds, r.spec.dim_embed, c);
    return r;
  }();
  return run;
}

struct TestSplit {
  Matrix emb;
  std::vector<int> labels;
};

// Held-out split with more angular noise than training saw.
TestSplit noisy_test_split() {
  TrainedRun& r = trained();
  SyntheticSpec t = r.spec;
  t.quality_noise_max = 1.5;
  const auto samples = generate_split(t, 1);
  TestSplit out;
  out.emb = r.magface.model.embed(stack_inputs(samples));
  for (const auto& s : samples) out.labels.push_back(s.label);
  return out;
}

}  // namespace

int main() {
  criterion(1, "lambda_g lower bound", 1.0, [] {
    const MagParams p{64.0, 10.0, 110.0, 0.4, 0.8, 35.0};
    const double closed = lambda_lower_bound(p);
    // s K / (-g'(l_a)) with g'(a) = -1/a^2 + 1/u_a^2
    const double via_deriv = p.s * p.slope() / (-regularizer_deriv(p.l_a, p));
    const double direct = p.s * p.slope() / (1.0 / (p.l_a * p.l_a) - 1.0 / (p.u_a * p.u_a));
    const double rel = std::max(std::abs(closed - via_deriv), std::abs(closed - direct)) / closed;
    const bool ok = std::abs(closed - 25.8133) < 5e-5 && rel < 1e-9 && p.lambda_g >= closed &&
                    p.guarantees_hold();
    return Outcome{ok, fmt("bound %.10f", closed) + fmt(", rel diff %.2e", rel) + ", lambda_g 35 satisfies it"};
  });

  criterion(2, "reduction identity", 10.0, [] {
    std::mt19937_64 rng(kAcceptanceSeed);
    double worst_arc = 0.0, worst_cos = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const auto inst = oracle::random_instance(rng, 8, 16, 10);
      MagParams p = random_params(rng);
      p.l_a = 1.0;  // all norms exceed u_a, so the clamp fixes the margin at u_m
      p.u_a = 2.0;
      p.lambda_g = 0.0;
      const double m = margin(1e9, p);
      worst_arc = std::max(worst_arc, std::abs(magface_forward(inst.batch, inst.head, p).batch_mean -
                                               arcface_forward(inst.batch, inst.head, p.s, m).batch_mean));
      worst_cos = std::max(worst_cos, std::abs(magcosface_forward(inst.batch, inst.head, p).batch_mean -
                                               cosface_forward(inst.batch, inst.head, p.s, m).batch_mean));
    }
    return Outcome{worst_arc < 1e-12 && worst_cos < 1e-12,
                   fmt("1000 instances, max |MagFace-ArcFace| %.2e", worst_arc) +
                       fmt(", max |MagCosFace-CosFace| %.2e", worst_cos)};
  });

  criterion(3, "gradient fidelity", 30.0, [] {
    std::mt19937_64 rng(kAcceptanceSeed + 1);
    double worst[4] = {0, 0, 0, 0};
    for (int t = 0; t < 100; ++t) {
      const auto inst = oracle::random_instance(rng, 8, 16, 10);
      const MagParams p = random_params(rng);
      const LossSpec specs[4] = {LossSpec::magface(p), LossSpec::magcosface(p), LossSpec::arcface(p.s, 0.5),
                                 LossSpec::cosface(p.s, 0.35)};
      for (int v = 0; v < 4; ++v) {
        const auto analytic = evaluate_loss(inst.batch, inst.head, specs[v], true);
        const auto fd = finite_diff_grad(
            [&](const FeatureBatch& b, const ClassHead& h) {
              return evaluate_loss(b, h, specs[v], false).batch_mean;
            },
            inst.batch, inst.head, 1e-4);
        worst[v] = std::max({worst[v], oracle::max_relative_error(analytic.grad_features, fd.grad_features, 1e-4),
                             oracle::max_relative_error(analytic.grad_head, fd.grad_head, 1e-4)});
      }
    }
    const bool ok = worst[0] < 1e-5 && worst[1] < 1e-5 && worst[2] < 1e-5 && worst[3] < 1e-5;
    return Outcome{ok, fmt("max rel err magface %.2e", worst[0]) + fmt(", magcosface %.2e", worst[1]) +
                           fmt(", arcface %.2e", worst[2]) + fmt(", cosface %.2e", worst[3])};
  });

  TheorySuiteConfig suite_cfg;
  suite_cfg.seed = kAcceptanceSeed;
  TheorySuiteReport suite;
  double suite_seconds = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      suite = run_theory_suite(suite_cfg);
    } catch (const std::exception& e) {
      suite.status = std::string("error: ") + e.what();
    }
    suite_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  auto suite_outcome = [&](std::initializer_list<const char*> props) {
    Outcome o{true, ""};
    for (const char* prop : props) {
      for (const char* v : {"magface", "magcosface"}) {
        const CertificateReport* r = suite.find(prop, v);
        if (!r) {
          o.pass = false;
          o.detail += std::string(prop) + "[" + v + "] missing; ";
          continue;
        }
        o.pass = o.pass && r->passed();
        o.detail += std::string(prop) + "[" + v + "] " + std::to_string(r->configs_tested) + " cases, " +
                    std::to_string(r->failures.size()) + " failures" + fmt(", worst margin %.3g; ", r->worst_margin);
      }
    }
    o.detail += fmt("suite total %.2fs", suite_seconds);
    return o;
  };

  criterion(4, "loss convex in magnitude", 30.0, [&] { return suite_outcome({"convexity"}); });
  criterion(5, "unique optimal magnitude", 60.0,
            [&] { return suite_outcome({"endpoint_signs", "optimum_grid_agreement"}); });
  criterion(6, "optimum monotone in theta and B", 60.0,
            [&] { return suite_outcome({"monotonic_theta", "monotonic_B"}); });

  criterion(7, "class-sampling probability", 1.0, [] {
    const double big = lemma1_probability(85000, 1, 0.5);
    const double small = lemma1_probability(2, 1, 0.0);
    const bool ok = big >= 1.0 - 1e-10 && std::abs(small - 0.75) <= 1e-15;
    return Outcome{ok, fmt("P(85000,1,0.5) = %.17g", big) + fmt(", P(2,1,0) = %.17g", small)};
  });

  criterion(8, "magnitude tracks quality after training", 120.0, [] {
    const TrainedRun& r = trained();
    const auto& mf = r.magface.stats;
    const auto& sm = r.softmax.stats;
    if (!mf.pearson_mag_cos || !sm.pearson_mag_cos || !mf.spearman_mag_quality) {
      return Outcome{false, "degenerate correlation"};
    }
    const double gap = *mf.pearson_mag_cos - *sm.pearson_mag_cos;
    const bool ok = gap >= 0.3 && *mf.spearman_mag_quality > 0.0;
    return Outcome{ok, fmt("pearson magface %.4f", *mf.pearson_mag_cos) +
                           fmt(", softmax %.4f", *sm.pearson_mag_cos) + fmt(", gap %.4f", gap) +
                           fmt(", spearman(a, q) magface %.4f", *mf.spearman_mag_quality) +
                           fmt(", train accuracy %.4f", mf.nearest_center_accuracy)};
  });

  criterion(9, "quality curve", 60.0, [] {
    const TestSplit t = noisy_test_split();
    const PairProtocol protocol = all_pairs_protocol(t.labels);
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < t.emb.rows(); ++i) mags.push_back(t.emb.row(i).norm());
    const std::vector<double> fractions{0.0, 0.1, 0.2, 0.3};
    const RejectCurve c = error_versus_reject(protocol, t.emb, mags, fractions, 0.01);
    const std::vector<double> flat_q(mags.size(), 1.0);
    const RejectCurve flat = error_versus_reject(protocol, t.emb, flat_q, fractions, 0.01);
    bool flat_ok = true;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      if (flat.valid[i]) flat_ok = flat_ok && flat.fnmr_values[i] == flat.fnmr_values[0];
    }
    const bool ok = c.valid[0] && c.valid[3] && c.fnmr_values[3] < c.fnmr_values[0] && flat_ok;
    return Outcome{ok, fmt("FNMR@FMR=0.01 at reject 0: %.5f", c.fnmr_values[0]) +
                           fmt(", at 0.3: %.5f", c.fnmr_values[3]) +
                           (flat_ok ? "; constant-quality control flat" : "; constant-quality control NOT flat")};
  });

  criterion(10, "MagFace+ aggregation", 60.0, [] {
    const TestSplit t = noisy_test_split();
    const TemplateSet templates = make_templates(t.labels, 2);
    const double mean = template_tar_at_far(t.emb, templates, AggregationRule::kMean, 0.01);
    const double plus = template_tar_at_far(t.emb, templates, AggregationRule::kMagFacePlus, 0.01);
    return Outcome{plus >= mean, std::to_string(templates.members.size()) + " two-sample templates" +
                                     fmt(", TAR@FAR=0.01 mean %.4f", mean) + fmt(", MagFace+ %.4f", plus)};
  });

  criterion(11, "metric units", 1.0, [] {
    const std::vector<int> truth{0, 0, 1, 1}, one{0, 0, 0, 0};
    const double f = bcubed_f(one, truth).f;
    const std::vector<int> a{0, 0, 1, 1, 2, 2}, b{5, 5, 9, 9, 7, 7}, c{2, 2, 0, 0, 1, 1};
    const double n1 = nmi(a, b), n2 = nmi(a, c);
    const std::vector<double> gen{0.9, 0.8, 0.3}, imp{0.5, 0.2, 0.1, 0.05};
    const ThresholdResult r = fnmr_at_fmr(gen, imp, 0.25);
    const bool ok = f == 2.0 / 3.0 && n1 == 1.0 && n2 == 1.0 && r.threshold == 0.5 && r.fnmr == 1.0 / 3.0;
    return Outcome{ok, fmt("BCubed F %.17g", f) + fmt(", NMI %.17g", n1) + fmt("/%.17g", n2) +
                           fmt(", threshold %.17g", r.threshold) + fmt(", FNMR %.17g", r.fnmr)};
  });

  std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
