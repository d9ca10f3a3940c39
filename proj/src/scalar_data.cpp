#include "scalarprobe/scalar_data.hpp"

#include "scalarprobe/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>

namespace scalarprobe {
namespace {

using boost::multiprecision::cpp_int;

cpp_int ipow(int base, int exp) { return boost::multiprecision::pow(cpp_int(base), static_cast<unsigned>(exp)); }

// Exact three-way comparison of v^2 against base^n for finite v > 0.
int compare_square_to_power(double v, int base, int n) {
  int e = 0;
  double frac = std::frexp(v, &e);
  auto mantissa = static_cast<std::int64_t>(std::ldexp(frac, 53));
  e -= 53;
  cpp_int lhs = cpp_int(mantissa) * cpp_int(mantissa);
  cpp_int rhs = 1;
  if (n >= 0) {
    rhs *= ipow(base, n);
  } else {
    lhs *= ipow(base, -n);
  }
  if (e >= 0) {
    lhs <<= 2 * e;
  } else {
    rhs <<= -2 * e;
  }
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

// Smallest positive double above the boundary base^(label + 1/2). Round half
// away from zero puts the boundary itself in the upper bucket when the
// boundary exponent is positive and in the lower one when it is negative.
double boundary_threshold(int base, int label) {
  const int n = 2 * label + 1;
  auto upper = [&](double v) {
    int c = compare_square_to_power(v, base, n);
    return n > 0 ? c >= 0 : c > 0;
  };
  double x = std::pow(static_cast<double>(base), label + 0.5);
  while (upper(x)) x = std::nextafter(x, 0.0);
  while (!upper(x)) x = std::nextafter(x, std::numeric_limits<double>::infinity());
  return x;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::kMass:
      return "mass";
    case Attribute::kLength:
      return "length";
    case Attribute::kPrice:
      return "price";
  }
  return "unknown";
}

Attribute parse_attribute(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mass") return Attribute::kMass;
  if (lower == "length") return Attribute::kLength;
  if (lower == "price") return Attribute::kPrice;
  throw ValidationError("unknown attribute '" + std::string(s) + "'");
}

BucketScheme::BucketScheme(int base, int min_exp, int count) : base_(base), min_exp_(min_exp), count_(count) {
  if (base < 2) throw ValidationError("bucket base must be >= 2");
  if (count != kNumBuckets) throw ValidationError("bucket count must be 12");
  if (min_exp < -100 || max_label() > 100) throw ValidationError("bucket exponents out of range");
  thresholds_.reserve(count - 1);
  for (int label = min_exp; label < max_label(); ++label) {
    thresholds_.push_back(boundary_threshold(base, label));
  }
}

int BucketScheme::bucketize(double value) const {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ValidationError("bucketize: value must be positive and finite");
  }
  auto above = std::upper_bound(thresholds_.begin(), thresholds_.end(), value) - thresholds_.begin();
  return min_exp_ + static_cast<int>(above);
}

int BucketScheme::label_for_log10(double log10_value) const {
  double scaled = base_ == 10 ? log10_value : log10_value / std::log10(static_cast<double>(base_));
  if (!std::isfinite(scaled)) throw ValidationError("non-finite point estimate");
  double r = std::round(scaled);
  if (r < min_exp_) return min_exp_;
  if (r > max_label()) return max_label();
  return static_cast<int>(r);
}

EmpiricalDistribution::EmpiricalDistribution(BucketScheme scheme, const Probs& probs, std::int64_t total_count)
    : scheme_(std::move(scheme)), probs_(probs), total_count_(total_count) {
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("distribution has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("distribution does not sum to 1");
  if (total_count_ < 1) throw ValidationError("distribution total_count must be >= 1");
}

EmpiricalDistribution EmpiricalDistribution::point_mass(const BucketScheme& scheme, int label) {
  Probs p{};
  p.at(scheme.index_of(label)) = 1.0;
  return {scheme, p, 1};
}

int EmpiricalDistribution::mode_label() const {
  int best = 0;
  for (int i = 1; i < kNumBuckets; ++i) {
    if (probs_[i] > probs_[best]) best = i;
  }
  return scheme_.label_of(best);
}

BuildResult build_distribution(const std::vector<ScalarRecord>& records, const BucketScheme& scheme) {
  if (records.empty()) throw ValidationError("build_distribution: no records");
  const auto& first = records.front();
  std::array<std::int64_t, kNumBuckets> counts{};
  std::int64_t total = 0;
  std::int64_t skipped = 0;
  for (const auto& r : records) {
    if (r.object != first.object || r.attribute != first.attribute) {
      throw ValidationError("build_distribution: records mix objects or attributes");
    }
    if (r.count < 1) throw ValidationError("build_distribution: count must be >= 1");
    if (!(r.value > 0.0) || !std::isfinite(r.value)) {
      ++skipped;
      continue;
    }
    counts[scheme.index_of(scheme.bucketize(r.value))] += r.count;
    total += r.count;
  }
  if (total == 0) throw ValidationError("build_distribution: no positive values for '" + first.object + "'");
  Probs p{};
  for (int i = 0; i < kNumBuckets; ++i) p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return {EmpiricalDistribution(scheme, p, total), skipped};
}

double log_median(const std::vector<ScalarRecord>& records) {
  std::vector<std::pair<double, std::int64_t>> items;
  std::int64_t total = 0;
  for (const auto& r : records) {
    if (r.value > 0.0 && std::isfinite(r.value) && r.count > 0) {
      items.emplace_back(r.value, r.count);
      total += r.count;
    }
  }
  if (items.empty()) throw ValidationError("log_median: no positive records");
  std::sort(items.begin(), items.end());

  // Value at 0-based rank k in the count-expanded sorted sequence.
  auto at_rank = [&](std::int64_t k) {
    std::int64_t seen = 0;
    for (const auto& [v, c] : items) {
      seen += c;
      if (k < seen) return v;
    }
    return items.back().first;
  };
  double median = total % 2 == 1 ? at_rank(total / 2) : 0.5 * (at_rank(total / 2 - 1) + at_rank(total / 2));
  return std::log10(median);
}

std::vector<double> smooth_density(const EmpiricalDistribution& dist, const ModalityOptions& options) {
  const auto& scheme = dist.scheme();
  const double lo = scheme.min_exp() - 1.0;
  const double hi = scheme.max_label() + 1.0;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / options.grid_step)) + 1;
  const double sigma = options.bandwidth;
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> grid(n, 0.0);
  for (std::size_t g = 0; g < n; ++g) {
    const double x = lo + static_cast<double>(g) * options.grid_step;
    double f = 0.0;
    for (int i = 0; i < kNumBuckets; ++i) {
      const double p = dist.probs()[i];
      if (p == 0.0) continue;
      const double z = (x - scheme.label_of(i)) / sigma;
      f += p * std::exp(-0.5 * z * z);
    }
    grid[g] = f * norm;
  }
  return grid;
}

ModalityLabel detect_modality(const EmpiricalDistribution& dist, const ModalityOptions& options) {
  std::vector<double> grid = smooth_density(dist, options);

  // Merge plateaus so a flat top is a single candidate.
  std::vector<double> v;
  v.reserve(grid.size());
  for (double x : grid) {
    if (v.empty() || x != v.back()) v.push_back(x);
  }

  const auto n = v.size();
  int peaks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || v[i] > v[i - 1];
    const bool right_ok = i + 1 == n || v[i] > v[i + 1];
    if (!left_ok || !right_ok) continue;

    // Climb down each side until a point at least as high; the lowest point
    // passed on the way is that side's valley.
    const double inf = std::numeric_limits<double>::infinity();
    double left_drop = inf;
    if (i > 0) {
      double lowest = v[i];
      for (std::size_t j = i; j-- > 0;) {
        if (v[j] >= v[i]) break;
        lowest = std::min(lowest, v[j]);
      }
      left_drop = v[i] - lowest;
    }
    double right_drop = inf;
    if (i + 1 < n) {
      double lowest = v[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        if (v[j] >= v[i]) break;
        lowest = std::min(lowest, v[j]);
      }
      right_drop = v[i] - lowest;
    }
    if (std::min(left_drop, right_drop) >= options.prominence) ++peaks;
  }
  ModalityLabel out;
  out.n_peaks = std::max(peaks, 1);
  out.label = out.n_peaks == 1 ? Modality::kUnimodal : Modality::kMultimodal;
  return out;
}

std::int64_t ObjectRecords::total_count() const {
  std::int64_t total = 0;
  for (const auto& r : records) total += r.count;
  return total;
}

Dataset load_records(std::istream& in, Attribute attribute, LoadStats* stats) {
  std::map<std::string, std::vector<ScalarRecord>> grouped;
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    ++local.lines;

    std::array<std::string_view, 4> fields;
    for (std::size_t f = 0; f < 4; ++f) {
      std::size_t tab = rest.find('\t');
      if (f < 3 && tab == std::string_view::npos) throw ParseError("expected 4 tab-separated fields", line_no);
      fields[f] = f < 3 ? rest.substr(0, tab) : rest;
      if (f < 3) rest.remove_prefix(tab + 1);
    }
    if (fields[3].find('\t') != std::string_view::npos) throw ParseError("expected 4 tab-separated fields", line_no);
    if (fields[0].empty()) throw ParseError("empty object name", line_no);

    Attribute a;
    try {
      a = parse_attribute(fields[1]);
    } catch (const ValidationError&) {
      throw ParseError("unknown attribute '" + std::string(fields[1]) + "'", line_no);
    }

    double value = 0.0;
    auto [vp, vec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), value);
    if (vec != std::errc() || vp != fields[2].data() + fields[2].size()) {
      throw ParseError("bad value '" + std::string(fields[2]) + "'", line_no);
    }
    std::int64_t count = 0;
    auto [cp, cec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), count);
    if (cec != std::errc() || cp != fields[3].data() + fields[3].size() || count < 1) {
      throw ParseError("bad count '" + std::string(fields[3]) + "'", line_no);
    }

    if (a != attribute) {
      ++local.other_attribute;
      continue;
    }
    if (!(value > 0.0) || !std::isfinite(value)) {
      ++local.non_positive;
      continue;
    }
    grouped[std::string(fields[0])].push_back({std::string(fields[0]), a, value, count});
  }
  if (in.bad()) throw ValidationError("read error in record file");

  Dataset ds;
  ds.attribute = attribute;
  for (auto& [name, recs] : grouped) ds.objects.push_back({name, std::move(recs)});
  if (stats != nullptr) *stats = local;
  return ds;
}

Dataset load_records_file(const std::string& path, Attribute attribute, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open record file '" + path + "'");
  return load_records(in, attribute, stats);
}

Dataset filter_min_count(const Dataset& dataset, std::int64_t min_total) {
  Dataset out;
  out.attribute = dataset.attribute;
  for (const auto& obj : dataset.objects) {
    if (obj.total_count() > min_total) out.objects.push_back(obj);
  }
  return out;
}

std::vector<ObjectDistribution> build_all(const Dataset& dataset, const BucketScheme& scheme,
                                          const ModalityOptions& modality) {
  std::vector<ObjectDistribution> out;
  out.reserve(dataset.objects.size());
  for (const auto& obj : dataset.objects) {
    BuildResult built = build_distribution(obj.records, scheme);
    ModalityLabel m = detect_modality(built.distribution, modality);
    out.push_back({obj.object, dataset.attribute, std::move(built.distribution), log_median(obj.records), m});
  }
  return out;
}

}  // namespace scalarprobe
