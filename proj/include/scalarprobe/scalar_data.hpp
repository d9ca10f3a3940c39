#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scalarprobe {

inline constexpr int kNumBuckets = 12;

enum class Attribute { kMass, kLength, kPrice };

std::string_view to_string(Attribute a);
// Accepts "mass"/"MASS" etc. Throws ValidationError otherwise.
Attribute parse_attribute(std::string_view s);

// Logarithmic bucket grid: labels min_exp .. min_exp + count - 1, bucket k
// holding values whose log_base rounds (half away from zero) to k.
class BucketScheme {
 public:
  BucketScheme(int base, int min_exp, int count = kNumBuckets);

  static BucketScheme decimal() { return {10, -2}; }
  static BucketScheme power_of_four() { return {4, -2}; }

  int base() const { return base_; }
  int min_exp() const { return min_exp_; }
  int count() const { return count_; }
  int max_label() const { return min_exp_ + count_ - 1; }

  int index_of(int label) const { return label - min_exp_; }
  int label_of(int index) const { return index + min_exp_; }

  // Bucket label of a positive value. Exact: the comparison against each
  // half-way boundary base^(k+1/2) is done in integer arithmetic, so the
  // result equals clamp(round(log_base(value))) for every double.
  int bucketize(double value) const;

  // Label of a log10-scale point estimate: clamp(round(log10_value / log10(base))).
  int label_for_log10(double log10_value) const;

  friend bool operator==(const BucketScheme& a, const BucketScheme& b) {
    return a.base_ == b.base_ && a.min_exp_ == b.min_exp_ && a.count_ == b.count_;
  }

 private:
  int base_;
  int min_exp_;
  int count_;
  // thresholds_[j]: smallest double that belongs to bucket index j + 1.
  std::vector<double> thresholds_;
};

struct ScalarRecord {
  std::string object;
  Attribute attribute = Attribute::kMass;
  double value = 0.0;
  std::int64_t count = 1;
};

using Probs = std::array<double, kNumBuckets>;

class EmpiricalDistribution {
 public:
  // Throws ValidationError unless probs is non-negative and sums to 1 (1e-9).
  EmpiricalDistribution(BucketScheme scheme, const Probs& probs, std::int64_t total_count = 1);

  static EmpiricalDistribution point_mass(const BucketScheme& scheme, int label);

  const BucketScheme& scheme() const { return scheme_; }
  const Probs& probs() const { return probs_; }
  double prob_at_label(int label) const { return probs_[scheme_.index_of(label)]; }
  std::int64_t total_count() const { return total_count_; }

  // Bucket label of the largest probability; ties go to the lower label.
  int mode_label() const;

 private:
  BucketScheme scheme_;
  Probs probs_;
  std::int64_t total_count_;
};

struct BuildResult {
  EmpiricalDistribution distribution;
  std::int64_t skipped_records = 0;  // non-positive values
};

// Count-weighted histogram over the scheme. Throws ValidationError for an
// empty list, mixed object/attribute, or when every record is skipped.
BuildResult build_distribution(const std::vector<ScalarRecord>& records, const BucketScheme& scheme);

// log10 of the count-weighted median; an even split averages the two middle
// values.
double log_median(const std::vector<ScalarRecord>& records);

enum class Modality { kUnimodal, kMultimodal };

struct ModalityLabel {
  int n_peaks = 1;
  Modality label = Modality::kUnimodal;
};

struct ModalityOptions {
  double bandwidth = 0.75;  // Gaussian kernel sigma, in buckets
  double grid_step = 0.05;
  double prominence = 1e-3;
};

// Smoothed density of the distribution on the grid min_exp-1 .. max+1.
std::vector<double> smooth_density(const EmpiricalDistribution& dist, const ModalityOptions& options = {});

// Hill-climbing peak count over the smoothed density.
ModalityLabel detect_modality(const EmpiricalDistribution& dist, const ModalityOptions& options = {});

// All records for one attribute, grouped by object.
struct ObjectRecords {
  std::string object;
  std::vector<ScalarRecord> records;
  std::int64_t total_count() const;
};

struct Dataset {
  Attribute attribute = Attribute::kMass;
  std::vector<ObjectRecords> objects;  // sorted by object name
};

struct LoadStats {
  std::size_t lines = 0;
  std::size_t other_attribute = 0;
  std::size_t non_positive = 0;
};

// Reads object<TAB>attribute<TAB>value<TAB>count lines, keeping `attribute`.
// Throws ParseError on malformed lines.
Dataset load_records(std::istream& in, Attribute attribute, LoadStats* stats = nullptr);
Dataset load_records_file(const std::string& path, Attribute attribute, LoadStats* stats = nullptr);

// Keeps objects whose total count is strictly greater than min_total.
Dataset filter_min_count(const Dataset& dataset, std::int64_t min_total = 100);

struct ObjectDistribution {
  std::string object;
  Attribute attribute = Attribute::kMass;
  EmpiricalDistribution distribution;
  double log_median = 0.0;
  ModalityLabel modality;
};

std::vector<ObjectDistribution> build_all(const Dataset& dataset, const BucketScheme& scheme,
                                          const ModalityOptions& modality = {});

}  // namespace scalarprobe
