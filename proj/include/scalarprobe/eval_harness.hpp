#pragma once

#include "scalarprobe/embedding_store.hpp"
#include "scalarprobe/metrics.hpp"
#include "scalarprobe/probes.hpp"
#include "scalarprobe/scalar_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace scalarprobe {

// Object-level assignment to cross-validation folds.
struct FoldPlan {
  std::uint64_t seed = 0;
  int n_folds = 10;
  std::map<std::string, int> assignments;

  // Objects of each fold, sorted by name.
  std::vector<std::vector<std::string>> folds() const;
};

// Sorts the objects, shuffles them with a seeded Fisher-Yates pass and deals
// them round-robin. Throws ValidationError with fewer objects than folds.
FoldPlan make_folds(std::vector<std::string> objects, std::uint64_t seed, int n_folds = 10);

enum class Subset { kAll, kUnimodal, kMultimodal };
std::string_view to_string(Subset s);

struct ModalitySplit {
  std::vector<std::size_t> unimodal;  // indices into the input
  std::vector<std::size_t> multimodal;
};

// Routes each object by a fresh detect_modality call.
ModalitySplit split_by_modality(const std::vector<ObjectDistribution>& data, const ModalityOptions& options = {});

struct ReportRow {
  std::string attribute;
  std::string encoder;
  std::string probe;  // "rgr", "mcc" or "aggregate"
  Subset subset = Subset::kAll;
  std::size_t n = 0;
  MetricTriple metrics;  // emd unnormalized

  double emd_normalized() const { return metrics.emd / kNumBuckets; }
};

// Echo of everything that shaped a report.
struct ReportConfig {
  double lambda = 0.0;
  int scheme_base = 10;
  int scheme_min_exp = -2;
  int scheme_count = kNumBuckets;
  std::uint64_t seed = 0;
  int n_folds = 10;
  std::string mse_variant = "density";
  std::string emd_normalization = "divide_by_k";
  bool standardize = true;
  int pca_k = 150;
  int pca_threshold = 2000;
  std::size_t dropped_objects = 0;  // data objects missing from the embedding table
  std::size_t pca_folds = 0;        // folds in which PCA was applied

  friend bool operator==(const ReportConfig&, const ReportConfig&) = default;
};

struct EvalReport {
  ReportConfig config;
  std::vector<ReportRow> rows;

  // Orders rows by (attribute, encoder, probe, subset).
  void sort_rows();
};

bool operator==(const ReportRow& a, const ReportRow& b);
bool operator==(const EvalReport& a, const EvalReport& b);

struct CvConfig {
  ProbeKind kind = ProbeKind::kMcc;
  double lambda = 0.01;
  TrainConfig train;
  std::uint64_t seed = 0;
  int n_folds = 10;
  BucketScheme scheme = BucketScheme::decimal();
  ModalityOptions modality;
  MseVariant mse_variant = MseVariant::kDensity;
  bool include_baseline = true;
};

// Default lambda for a probe kind: 1 for rgr, 0.01 for mcc.
double default_lambda(ProbeKind kind);

// The objects a CV run will use: those present in the table, in input order.
struct CvInputs {
  std::vector<const ObjectDistribution*> objects;
  std::size_t dropped = 0;
};
CvInputs intersect(const std::vector<ObjectDistribution>& data, const EmbeddingTable& table);

TrainingSet training_set(const std::vector<const ObjectDistribution*>& objects, const EmbeddingTable& table);

// The probe fitted for one fold: it sees only objects outside that fold.
ProbeModel fit_fold(const CvInputs& inputs, const EmbeddingTable& table, const FoldPlan& plan, int fold,
                    const CvConfig& config);

// Aggregate-baseline prediction for one fold, from its training objects.
EmpiricalDistribution fold_baseline(const CvInputs& inputs, const FoldPlan& plan, int fold);

// Pooled per-object mean of accuracy / MSE / EMD, via the parallel kernel.
MetricTriple evaluate_predictions(const Matrix& predicted, const std::vector<EmpiricalDistribution>& truths,
                                  MseVariant variant = MseVariant::kDensity);

// k-fold cross-validation over objects. Each test object is scored once; rows
// hold the pooled mean over all test objects in the subset. Subsets with no
// objects produce no row. Throws ValidationError when no data object has an
// embedding.
EvalReport run_cv(const std::vector<ObjectDistribution>& data, const EmbeddingTable& table, const CvConfig& config);

enum class Relation { kBigger, kSmaller, kSimilar };
std::string_view to_string(Relation r);
Relation parse_relation(std::string_view s);

struct RelativePair {
  std::string object_a;
  std::string object_b;
  Attribute attribute = Attribute::kMass;
  Relation label = Relation::kSimilar;
};

// object_a<TAB>object_b<TAB>attribute<TAB>label
std::vector<RelativePair> load_pairs(std::istream& in);
std::vector<RelativePair> load_pairs_file(const std::string& path);

// Sign of the log10 difference; |difference| < tau counts as similar.
Relation compare_estimates(double a, double b, double tau = 0.1);
// Equal labels are similar; with adjacent_similar, labels one apart are too.
Relation compare_buckets(int a, int b, bool adjacent_similar = false);

struct RelativeResult {
  double accuracy = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // pairs with a missing embedding or another attribute
};

// rgr compares point estimates, mcc compares modal buckets.
RelativeResult eval_relative(const ProbeModel& model, const EmbeddingTable& table,
                             const std::vector<RelativePair>& pairs, Attribute attribute, double tau = 0.1,
                             bool adjacent_similar = false);

struct NamedDistribution {
  std::string object;
  EmpiricalDistribution distribution;
};

struct TransferResult {
  MetricTriple metrics;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // products without an embedding
};

// Scores a base-4 probe on product price distributions. Throws
// ValidationError unless probe and products share a base-4 scheme.
TransferResult eval_price_transfer(const ProbeModel& model, const EmbeddingTable& table,
                                   const std::vector<NamedDistribution>& products,
                                   MseVariant variant = MseVariant::kDensity);

// Same metric path with a constant prediction (e.g. the aggregate baseline).
TransferResult eval_price_transfer(const EmpiricalDistribution& constant,
                                   const std::vector<NamedDistribution>& products,
                                   MseVariant variant = MseVariant::kDensity);

}  // namespace scalarprobe
