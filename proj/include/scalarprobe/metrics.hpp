#pragma once

#include "scalarprobe/scalar_data.hpp"

#include <span>
#include <vector>

namespace scalarprobe {

struct MetricTriple {
  double accuracy = 0.0;
  double mse = 0.0;
  double emd = 0.0;  // unnormalized, in bucket units
};

enum class MseVariant {
  kDensity,  // (1/K) sum (p_i - q_i)^2
  kCdf,      // (1/K) sum (P_i - Q_i)^2 over cumulative sums
};

struct Flow {
  int from = 0;  // bucket index
  int to = 0;
  double mass = 0.0;
};

struct TransportPlan {
  std::vector<Flow> flows;
};

// Primitives over raw 12-bucket arrays; the distribution overloads below
// check schemes first and forward here.
namespace raw {
using Hist = std::span<const double, kNumBuckets>;

// Index of the largest entry, lowest index on ties.
int argmax(Hist p);
double density_mse(Hist p, Hist q);
double cdf_mse(Hist p, Hist q);
// sum_i |P_i - Q_i|
double emd(Hist p, Hist q);
}  // namespace raw

// 1 when the modal buckets agree (ties resolved toward the lower label).
int bucket_accuracy(const EmpiricalDistribution& predicted, const EmpiricalDistribution& truth);
double density_mse(const EmpiricalDistribution& p, const EmpiricalDistribution& q,
                   MseVariant variant = MseVariant::kDensity);
// Wasserstein-1 with ground distance |i - j| between bucket indices.
double emd(const EmpiricalDistribution& p, const EmpiricalDistribution& q);
// emd / K, the per-bucket scale used in reports.
double emd_normalized(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

// Exact minimum-cost transport by the left-to-right sweep, with the plan that
// attains it. Used as an independent check of emd().
std::pair<double, TransportPlan> brute_force_emd(std::span<const double, kNumBuckets> p,
                                                  std::span<const double, kNumBuckets> q);

MetricTriple evaluate_pair(const EmpiricalDistribution& predicted, const EmpiricalDistribution& truth,
                           MseVariant variant = MseVariant::kDensity);

// Per-bucket mean of the training distributions.
EmpiricalDistribution aggregate_baseline(const std::vector<EmpiricalDistribution>& train);

// Expected accuracy of predicting a sample from each truth, scored against
// the truth's mode: the mean modal mass.
double sampling_upper_bound(const std::vector<EmpiricalDistribution>& dists);

}  // namespace scalarprobe
