#include "scalarprobe/metrics.hpp"

#include "scalarprobe/error.hpp"

#include <cmath>

namespace scalarprobe {
namespace {

void require_same_scheme(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  if (!(a.scheme() == b.scheme())) throw ValidationError("distributions use different bucket schemes");
}

raw::Hist hist(const EmpiricalDistribution& d) { return raw::Hist(d.probs()); }

}  // namespace

namespace raw {

int argmax(Hist p) {
  int best = 0;
  for (int i = 1; i < kNumBuckets; ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

double density_mse(Hist p, Hist q) {
  double s = 0.0;
  for (int i = 0; i < kNumBuckets; ++i) {
    double d = p[i] - q[i];
    s += d * d;
  }
  return s / kNumBuckets;
}

double cdf_mse(Hist p, Hist q) {
  double s = 0.0;
  double cp = 0.0;
  double cq = 0.0;
  for (int i = 0; i < kNumBuckets; ++i) {
    cp += p[i];
    cq += q[i];
    double d = cp - cq;
    s += d * d;
  }
  return s / kNumBuckets;
}

double emd(Hist p, Hist q) {
  double s = 0.0;
  double cp = 0.0;
  double cq = 0.0;
  // The last CDF difference is zero for normalized inputs.
  for (int i = 0; i + 1 < kNumBuckets; ++i) {
    cp += p[i];
    cq += q[i];
    s += std::abs(cp - cq);
  }
  return s;
}

}  // namespace raw

int bucket_accuracy(const EmpiricalDistribution& predicted, const EmpiricalDistribution& truth) {
  require_same_scheme(predicted, truth);
  return raw::argmax(hist(predicted)) == raw::argmax(hist(truth)) ? 1 : 0;
}

double density_mse(const EmpiricalDistribution& p, const EmpiricalDistribution& q, MseVariant variant) {
  require_same_scheme(p, q);
  return variant == MseVariant::kDensity ? raw::density_mse(hist(p), hist(q)) : raw::cdf_mse(hist(p), hist(q));
}

double emd(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  require_same_scheme(p, q);
  return raw::emd(hist(p), hist(q));
}

double emd_normalized(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  return emd(p, q) / kNumBuckets;
}

std::pair<double, TransportPlan> brute_force_emd(std::span<const double, kNumBuckets> p,
                                                  std::span<const double, kNumBuckets> q) {
  // Supply and demand are consumed in bucket order; in one dimension with a
  // convex ground cost this monotone matching is optimal.
  std::array<double, kNumBuckets> supply{};
  std::array<double, kNumBuckets> demand{};
  for (int i = 0; i < kNumBuckets; ++i) {
    double common = std::min(p[i], q[i]);
    supply[i] = p[i] - common;
    demand[i] = q[i] - common;
  }
  TransportPlan plan;
  double cost = 0.0;
  int s = 0;
  int d = 0;
  constexpr double kEps = 1e-15;
  while (true) {
    while (s < kNumBuckets && supply[s] <= kEps) ++s;
    while (d < kNumBuckets && demand[d] <= kEps) ++d;
    if (s == kNumBuckets || d == kNumBuckets) break;
    double moved = std::min(supply[s], demand[d]);
    plan.flows.push_back({s, d, moved});
    cost += moved * std::abs(s - d);
    supply[s] -= moved;
    demand[d] -= moved;
  }
  return {cost, std::move(plan)};
}

MetricTriple evaluate_pair(const EmpiricalDistribution& predicted, const EmpiricalDistribution& truth,
                           MseVariant variant) {
  return {static_cast<double>(bucket_accuracy(predicted, truth)), density_mse(predicted, truth, variant),
          emd(predicted, truth)};
}

EmpiricalDistribution aggregate_baseline(const std::vector<EmpiricalDistribution>& train) {
  if (train.empty()) throw ValidationError("aggregate_baseline: no training distributions");
  const BucketScheme& scheme = train.front().scheme();
  Probs mean{};
  for (const auto& d : train) {
    if (!(d.scheme() == scheme)) throw ValidationError("aggregate_baseline: mixed bucket schemes");
    for (int i = 0; i < kNumBuckets; ++i) mean[i] += d.probs()[i];
  }
  double total = 0.0;
  for (double& m : mean) {
    m /= static_cast<double>(train.size());
    total += m;
  }
  for (double& m : mean) m /= total;
  return {scheme, mean, static_cast<std::int64_t>(train.size())};
}

double sampling_upper_bound(const std::vector<EmpiricalDistribution>& dists) {
  if (dists.empty()) throw ValidationError("sampling_upper_bound: no distributions");
  double sum = 0.0;
  for (const auto& d : dists) sum += d.prob_at_label(d.mode_label());
  return sum / static_cast<double>(dists.size());
}

}  // namespace scalarprobe
