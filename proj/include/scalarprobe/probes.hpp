#pragma once

#include "scalarprobe/embedding_store.hpp"
#include "scalarprobe/scalar_data.hpp"

#include <json.hpp>

#include <optional>
#include <string_view>
#include <vector>

namespace scalarprobe {

struct TrainConfig {
  int max_iters = 1000;
  double grad_tolerance = 1e-6;
  int pca_k = 150;
  // PCA is fitted only when the training set has fewer objects than this.
  int pca_threshold = 2000;
  bool standardize = true;
};

// Ridge regression on log10-median targets.
struct RgrProbe {
  Vector weights;
  double intercept = 0.0;
  double lambda = 1.0;
};

// Exact minimizer of sum_i (w.x_i + b - y_i)^2 + lambda ||w||^2 with b
// unpenalized (or fixed at 0 when fit_intercept is false).
RgrProbe train_rgr(const Matrix& x, const Vector& y, double lambda = 1.0, bool fit_intercept = true);
double predict_rgr(const RgrProbe& probe, const Vector& x);

// Point mass at the bucket containing a log10-scale estimate.
EmpiricalDistribution rgr_to_bucket(double estimate, const BucketScheme& scheme);

// Linear softmax classifier over the buckets of a scheme.
struct MccProbe {
  BucketScheme scheme = BucketScheme::decimal();
  Matrix weights;  // 12 x features
  Vector intercepts;
  double lambda = 0.01;
};

struct MccTrainInfo {
  double objective = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // J after every accepted step, starting at W=0, b=0
};

// Minimizes the soft-label cross entropy plus (lambda/2)||W||_F^2 by
// full-batch L-BFGS with a backtracking Armijo line search, starting from
// zero. Each row of y must sum to 1 within 1e-9. Throws TrainingError if the
// objective rises on 10 consecutive accepted steps.
MccProbe train_mcc(const Matrix& x, const Matrix& y, const BucketScheme& scheme, double lambda = 0.01,
                   const TrainConfig& config = {}, MccTrainInfo* info = nullptr);

EmpiricalDistribution predict_mcc(const MccProbe& probe, const Vector& x);
Matrix predict_mcc(const MccProbe& probe, const Matrix& x);

enum class ProbeKind { kRgr, kMcc };

std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view s);

// Standardization and optional PCA, fitted on training rows only.
struct FeaturePipeline {
  std::optional<Standardizer> standardizer;
  std::optional<PcaProjection> pca;

  static FeaturePipeline fit(const Matrix& train_x, const TrainConfig& config);
  Matrix transform(const Matrix& x) const;
  Vector transform(const Vector& x) const;
};

// A trained probe together with the feature transform it was fitted behind.
struct ProbeModel {
  ProbeKind kind = ProbeKind::kMcc;
  BucketScheme scheme = BucketScheme::decimal();
  double lambda = 0.0;
  FeaturePipeline features;
  std::optional<RgrProbe> rgr;
  std::optional<MccProbe> mcc;
  MccTrainInfo mcc_info;

  // Predicted bucket distribution for a raw embedding (point mass for rgr).
  EmpiricalDistribution predict(const Vector& raw) const;
  // Row-wise distributions for raw embeddings, n x 12.
  Matrix predict(const Matrix& raw) const;
  // log10 point estimate; rgr only.
  double predict_log10(const Vector& raw) const;
};

struct TrainingSet {
  Matrix x;                                     // raw embeddings, one row per object
  std::vector<EmpiricalDistribution> targets;   // mcc soft labels
  Vector log_medians;                           // rgr targets
};

ProbeModel fit_probe(ProbeKind kind, const TrainingSet& train, const BucketScheme& scheme, double lambda,
                     const TrainConfig& config = {});

nlohmann::json to_json(const ProbeModel& model);
ProbeModel probe_from_json(const nlohmann::json& j);

}  // namespace scalarprobe
