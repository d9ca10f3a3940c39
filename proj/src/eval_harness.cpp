#include "scalarprobe/eval_harness.hpp"

#include "scalarprobe/error.hpp"
#include "scalarprobe/kernels.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <random>
#include <tuple>

namespace scalarprobe {
namespace {

// Uniform integer in [0, bound) by rejection, so the shuffle depends only on
// the mt19937_64 output sequence.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

Matrix stack_probs(const std::vector<EmpiricalDistribution>& dists) {
  Matrix m(static_cast<Eigen::Index>(dists.size()), kNumBuckets);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    for (int c = 0; c < kNumBuckets; ++c) m(static_cast<Eigen::Index>(i), c) = dists[i].probs()[c];
  }
  return m;
}

struct Accumulator {
  kernels::MetricSums sums;

  void add(const kernels::MetricSums& s) {
    sums.correct += s.correct;
    sums.mse += s.mse;
    sums.emd += s.emd;
    sums.n += s.n;
  }
};

Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> FoldPlan::folds() const {
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(n_folds));
  for (const auto& [object, fold] : assignments) out[static_cast<std::size_t>(fold)].push_back(object);
  return out;
}

FoldPlan make_folds(std::vector<std::string> objects, std::uint64_t seed, int n_folds) {
  if (n_folds < 2) throw ValidationError("make_folds: need at least 2 folds");
  std::sort(objects.begin(), objects.end());
  if (std::adjacent_find(objects.begin(), objects.end()) != objects.end()) {
    throw ValidationError("make_folds: duplicate object names");
  }
  if (objects.size() < static_cast<std::size_t>(n_folds)) {
    throw ValidationError("make_folds: " + std::to_string(objects.size()) + " objects for " +
                          std::to_string(n_folds) + " folds");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = objects.size() - 1; i > 0; --i) {
    std::swap(objects[i], objects[uniform_below(rng, i + 1)]);
  }
  FoldPlan plan;
  plan.seed = seed;
  plan.n_folds = n_folds;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    plan.assignments[objects[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  }
  return plan;
}

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::kAll:
      return "all";
    case Subset::kUnimodal:
      return "unimodal";
    case Subset::kMultimodal:
      return "multimodal";
  }
  return "unknown";
}

ModalitySplit split_by_modality(const std::vector<ObjectDistribution>& data, const ModalityOptions& options) {
  ModalitySplit split;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (detect_modality(data[i].distribution, options).label == Modality::kUnimodal) {
      split.unimodal.push_back(i);
    } else {
      split.multimodal.push_back(i);
    }
  }
  return split;
}

void EvalReport::sort_rows() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.attribute, a.encoder, a.probe, a.subset) < std::tie(b.attribute, b.encoder, b.probe, b.subset);
  });
}

bool operator==(const ReportRow& a, const ReportRow& b) {
  return a.attribute == b.attribute && a.encoder == b.encoder && a.probe == b.probe && a.subset == b.subset &&
         a.n == b.n && a.metrics.accuracy == b.metrics.accuracy && a.metrics.mse == b.metrics.mse &&
         a.metrics.emd == b.metrics.emd;
}

bool operator==(const EvalReport& a, const EvalReport& b) { return a.config == b.config && a.rows == b.rows; }

double default_lambda(ProbeKind kind) { return kind == ProbeKind::kRgr ? 1.0 : 0.01; }

CvInputs intersect(const std::vector<ObjectDistribution>& data, const EmbeddingTable& table) {
  CvInputs in;
  for (const auto& d : data) {
    if (table.contains(d.object)) {
      in.objects.push_back(&d);
    } else {
      ++in.dropped;
    }
  }
  return in;
}

TrainingSet training_set(const std::vector<const ObjectDistribution*>& objects, const EmbeddingTable& table) {
  TrainingSet ts;
  ts.x.resize(static_cast<Eigen::Index>(objects.size()), table.dim());
  ts.log_medians.resize(static_cast<Eigen::Index>(objects.size()));
  ts.targets.reserve(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    ts.x.row(row) = table.row(objects[i]->object).transpose();
    ts.log_medians[row] = objects[i]->log_median;
    ts.targets.push_back(objects[i]->distribution);
  }
  return ts;
}

namespace {

std::vector<const ObjectDistribution*> fold_members(const CvInputs& inputs, const FoldPlan& plan, int fold,
                                                     bool in_fold) {
  std::vector<const ObjectDistribution*> out;
  for (const auto* d : inputs.objects) {
    auto it = plan.assignments.find(d->object);
    if (it == plan.assignments.end()) throw ValidationError("object '" + d->object + "' has no fold");
    if ((it->second == fold) == in_fold) out.push_back(d);
  }
  return out;
}

}  // namespace

ProbeModel fit_fold(const CvInputs& inputs, const EmbeddingTable& table, const FoldPlan& plan, int fold,
                    const CvConfig& config) {
  TrainingSet train = training_set(fold_members(inputs, plan, fold, false), table);
  return fit_probe(config.kind, train, config.scheme, config.lambda, config.train);
}

EmpiricalDistribution fold_baseline(const CvInputs& inputs, const FoldPlan& plan, int fold) {
  std::vector<EmpiricalDistribution> train;
  for (const auto* d : fold_members(inputs, plan, fold, false)) train.push_back(d->distribution);
  return aggregate_baseline(train);
}

MetricTriple evaluate_predictions(const Matrix& predicted, const std::vector<EmpiricalDistribution>& truths,
                                  MseVariant variant) {
  if (truths.empty()) throw ValidationError("evaluate_predictions: nothing to evaluate");
  auto s = kernels::metric_sums(predicted, stack_probs(truths), variant);
  const auto n = static_cast<double>(s.n);
  return {s.correct / n, s.mse / n, s.emd / n};
}

EvalReport run_cv(const std::vector<ObjectDistribution>& data, const EmbeddingTable& table, const CvConfig& config) {
  CvInputs inputs = intersect(data, table);
  if (inputs.objects.empty()) throw ValidationError("run_cv: no data object has an embedding");
  for (const auto* d : inputs.objects) {
    if (!(d->distribution.scheme() == config.scheme)) throw ValidationError("run_cv: data scheme differs from config");
  }
  std::vector<std::string> names;
  for (const auto* d : inputs.objects) names.push_back(d->object);
  const FoldPlan plan = make_folds(names, config.seed, config.n_folds);

  EvalReport report;
  auto& cfg = report.config;
  cfg.lambda = config.lambda;
  cfg.scheme_base = config.scheme.base();
  cfg.scheme_min_exp = config.scheme.min_exp();
  cfg.scheme_count = config.scheme.count();
  cfg.seed = config.seed;
  cfg.n_folds = config.n_folds;
  cfg.mse_variant = config.mse_variant == MseVariant::kDensity ? "density" : "cdf";
  cfg.standardize = config.train.standardize;
  cfg.pca_k = config.train.pca_k;
  cfg.pca_threshold = config.train.pca_threshold;
  cfg.dropped_objects = inputs.dropped;

  // [probe | baseline][subset]
  Accumulator acc[2][3];
  for (int fold = 0; fold < config.n_folds; ++fold) {
    std::vector<const ObjectDistribution*> test = fold_members(inputs, plan, fold, true);
    if (test.empty()) continue;

    ProbeModel model = fit_fold(inputs, table, plan, fold, config);
    if (model.features.pca) ++cfg.pca_folds;
    TrainingSet test_set = training_set(test, table);
    Matrix predicted = model.predict(test_set.x);
    Matrix truth = stack_probs(test_set.targets);

    Matrix baseline_pred(predicted.rows(), kNumBuckets);
    if (config.include_baseline) {
      EmpiricalDistribution base = fold_baseline(inputs, plan, fold);
      for (Eigen::Index i = 0; i < baseline_pred.rows(); ++i) {
        for (int c = 0; c < kNumBuckets; ++c) baseline_pred(i, c) = base.probs()[c];
      }
    }

    std::vector<Eigen::Index> rows[3];
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      rows[0].push_back(r);
      bool uni = detect_modality(test[i]->distribution, config.modality).label == Modality::kUnimodal;
      rows[uni ? 1 : 2].push_back(r);
    }
    for (int s = 0; s < 3; ++s) {
      if (rows[s].empty()) continue;
      Matrix t = select_rows(truth, rows[s]);
      acc[0][s].add(kernels::metric_sums(select_rows(predicted, rows[s]), t, config.mse_variant));
      if (config.include_baseline) {
        acc[1][s].add(kernels::metric_sums(select_rows(baseline_pred, rows[s]), t, config.mse_variant));
      }
    }
  }

  const std::string attribute(inputs.objects.empty() ? "" : to_string(inputs.objects.front()->attribute));
  for (int p = 0; p < (config.include_baseline ? 2 : 1); ++p) {
    for (int s = 0; s < 3; ++s) {
      const auto& sums = acc[p][s].sums;
      if (sums.n == 0) continue;
      const auto n = static_cast<double>(sums.n);
      report.rows.push_back({attribute, table.encoder_name(), p == 0 ? std::string(to_string(config.kind)) : "aggregate",
                             static_cast<Subset>(s), static_cast<std::size_t>(sums.n),
                             {sums.correct / n, sums.mse / n, sums.emd / n}});
    }
  }
  report.sort_rows();
  return report;
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::kBigger:
      return "bigger";
    case Relation::kSmaller:
      return "smaller";
    case Relation::kSimilar:
      return "similar";
  }
  return "unknown";
}

Relation parse_relation(std::string_view s) {
  if (s == "bigger") return Relation::kBigger;
  if (s == "smaller") return Relation::kSmaller;
  if (s == "similar") return Relation::kSimilar;
  throw ValidationError("unknown relation label '" + std::string(s) + "'");
}

std::vector<RelativePair> load_pairs(std::istream& in) {
  std::vector<RelativePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) throw ParseError("expected 4 tab-separated fields", line_no);
    try {
      RelativePair p{fields[0], fields[1], parse_attribute(fields[2]), parse_relation(fields[3])};
      if (p.object_a == p.object_b) throw ValidationError("pair compares an object with itself");
      pairs.push_back(std::move(p));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return pairs;
}

std::vector<RelativePair> load_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pairs file '" + path + "'");
  return load_pairs(in);
}

Relation compare_estimates(double a, double b, double tau) {
  const double diff = a - b;
  if (std::abs(diff) < tau) return Relation::kSimilar;
  return diff > 0 ? Relation::kBigger : Relation::kSmaller;
}

Relation compare_buckets(int a, int b, bool adjacent_similar) {
  if (a == b || (adjacent_similar && std::abs(a - b) == 1)) return Relation::kSimilar;
  return a > b ? Relation::kBigger : Relation::kSmaller;
}

RelativeResult eval_relative(const ProbeModel& model, const EmbeddingTable& table,
                             const std::vector<RelativePair>& pairs, Attribute attribute, double tau,
                             bool adjacent_similar) {
  RelativeResult result;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    if (p.attribute != attribute || !table.contains(p.object_a) || !table.contains(p.object_b)) {
      ++result.skipped;
      continue;
    }
    Relation predicted;
    if (model.kind == ProbeKind::kRgr) {
      predicted = compare_estimates(model.predict_log10(table.row(p.object_a)), model.predict_log10(table.row(p.object_b)), tau);
    } else {
      predicted = compare_buckets(model.predict(Vector(table.row(p.object_a))).mode_label(),
                                  model.predict(Vector(table.row(p.object_b))).mode_label(), adjacent_similar);
    }
    correct += predicted == p.label ? 1 : 0;
    ++result.evaluated;
  }
  if (result.evaluated == 0) throw ValidationError("eval_relative: no pair could be evaluated");
  result.accuracy = static_cast<double>(correct) / static_cast<double>(result.evaluated);
  return result;
}

TransferResult eval_price_transfer(const ProbeModel& model, const EmbeddingTable& table,
                                   const std::vector<NamedDistribution>& products, MseVariant variant) {
  if (model.scheme.base() != 4) throw ValidationError("price transfer needs a probe trained on base-4 buckets");
  TransferResult result;
  std::vector<std::string> names;
  std::vector<EmpiricalDistribution> truths;
  for (const auto& p : products) {
    if (!(p.distribution.scheme() == model.scheme)) throw ValidationError("product '" + p.object + "' uses another scheme");
    if (!table.contains(p.object)) {
      ++result.skipped;
      continue;
    }
    names.push_back(p.object);
    truths.push_back(p.distribution);
  }
  if (truths.empty()) throw ValidationError("price transfer: no product has an embedding");
  result.metrics = evaluate_predictions(model.predict(table.gather(names)), truths, variant);
  result.evaluated = truths.size();
  return result;
}

TransferResult eval_price_transfer(const EmpiricalDistribution& constant,
                                   const std::vector<NamedDistribution>& products, MseVariant variant) {
  if (constant.scheme().base() != 4) throw ValidationError("price transfer needs base-4 buckets");
  if (products.empty()) throw ValidationError("price transfer: no products");
  std::vector<EmpiricalDistribution> truths;
  for (const auto& p : products) {
    if (!(p.distribution.scheme() == constant.scheme())) throw ValidationError("product '" + p.object + "' uses another scheme");
    truths.push_back(p.distribution);
  }
  Matrix predicted(static_cast<Eigen::Index>(truths.size()), kNumBuckets);
  for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
    for (int c = 0; c < kNumBuckets; ++c) predicted(i, c) = constant.probs()[c];
  }
  TransferResult result;
  result.metrics = evaluate_predictions(predicted, truths, variant);
  result.evaluated = truths.size();
  return result;
}

}  // namespace scalarprobe
