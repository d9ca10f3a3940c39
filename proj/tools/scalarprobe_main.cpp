// scalarprobe: command-line front end.
//
//   scalarprobe canonicalize --in <path|-> --out <path|-> [--stats <json>]
//   scalarprobe distributions --data <tsv> --attribute <a> [--base 10] --out <json>
//   scalarprobe train --data <tsv> --embeddings <file> --probe {rgr|mcc} --attribute <a> --out <probe.json>
//   scalarprobe evaluate --data <tsv> --embeddings <file> --probe {rgr|mcc} --attribute <a> --out report.csv
//   scalarprobe transfer relative --pairs <tsv> --probe-file <json> --embeddings <file> --attribute <a>
//   scalarprobe transfer price --products <json> --probe-file <json> --embeddings <file>
//   scalarprobe upper-bound --data <tsv> --attribute <a>
//
// Exit status: 0 success, 2 validation error, 1 anything else.

#include "scalarprobe/canonicalizer.hpp"
#include "scalarprobe/error.hpp"
#include "scalarprobe/eval_harness.hpp"
#include "scalarprobe/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace sp = scalarprobe;

namespace {

struct DataOptions {
  std::string data;
  std::string attribute;
  int base = 10;
  int min_exp = -2;
  std::int64_t min_count = 100;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.data, "object<TAB>attribute<TAB>value<TAB>count records")->required();
  cmd->add_option("--attribute", o.attribute, "mass | length | price")->required();
  cmd->add_option("--base", o.base, "bucket base (10, or 4 for the price transfer scheme)");
  cmd->add_option("--min-exp", o.min_exp, "lowest bucket label");
  cmd->add_option("--min-count", o.min_count, "keep objects with strictly more values than this");
}

std::vector<sp::ObjectDistribution> load_distributions(const DataOptions& o) {
  sp::Attribute attribute = sp::parse_attribute(o.attribute);
  sp::LoadStats stats;
  sp::Dataset ds = sp::filter_min_count(sp::load_records_file(o.data, attribute, &stats), o.min_count);
  if (stats.non_positive > 0) {
    std::cerr << "warning: skipped " << stats.non_positive << " records with non-positive values\n";
  }
  std::cerr << "loaded " << ds.objects.size() << " objects for " << sp::to_string(attribute) << '\n';
  return sp::build_all(ds, sp::BucketScheme(o.base, o.min_exp));
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sp::ValidationError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw sp::ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw sp::ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

int run_canonicalize(const std::string& in_path, const std::string& out_path, const std::string& stats_path) {
  std::ifstream in_file;
  std::ofstream out_file;
  std::istream* in = &std::cin;
  std::ostream* out = &std::cout;
  if (in_path != "-") {
    in_file.open(in_path, std::ios::binary);
    if (!in_file) throw sp::ValidationError("cannot open '" + in_path + "'");
    in = &in_file;
  }
  if (out_path != "-") {
    out_file.open(out_path, std::ios::binary);
    if (!out_file) throw sp::ValidationError("cannot write '" + out_path + "'");
    out = &out_file;
  }
  sp::canon::CanonicalizationStats stats = sp::canon::canonicalize_stream(*in, *out);
  if (!stats_path.empty()) write_json(sp::stats_to_json(stats), stats_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalar-magnitude probing of frozen embeddings"};
  app.require_subcommand(1);

  std::string in_path;
  std::string out_path;
  std::string stats_path;
  auto* canonicalize = app.add_subcommand("canonicalize", "rewrite numerals as <digits>[EXP]<exponent>");
  canonicalize->add_option("--in", in_path, "input path or -")->required();
  canonicalize->add_option("--out", out_path, "output path or -")->required();
  canonicalize->add_option("--stats", stats_path, "write counters as JSON here");

  DataOptions dist_opts;
  std::string dist_out;
  auto* distributions = app.add_subcommand("distributions", "bucket records into per-object distributions");
  add_data_options(distributions, dist_opts);
  distributions->add_option("--out", dist_out, "JSON output")->required();

  DataOptions train_data;
  std::string train_embeddings;
  std::string train_probe;
  std::optional<double> train_lambda;
  int train_pca_k = 150;
  std::uint64_t train_seed = 0;
  std::string train_out;
  auto* train = app.add_subcommand("train", "fit one probe on all objects");
  add_data_options(train, train_data);
  train->add_option("--embeddings", train_embeddings)->required();
  train->add_option("--probe", train_probe)->required()->check(CLI::IsMember({"rgr", "mcc"}));
  train->add_option("--lambda", train_lambda, "regularization (default 1 for rgr, 0.01 for mcc)");
  train->add_option("--pca-k", train_pca_k);
  train->add_option("--seed", train_seed, "accepted for symmetry with evaluate; training is deterministic");
  train->add_option("--out", train_out, "probe JSON")->required();

  DataOptions eval_data;
  std::string eval_embeddings;
  std::string eval_probe;
  std::optional<double> eval_lambda;
  int eval_pca_k = 150;
  int eval_folds = 10;
  std::uint64_t eval_seed = 0;
  std::string eval_out;
  std::string eval_format = "csv";
  std::string eval_mse = "density";
  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation of a probe");
  add_data_options(evaluate, eval_data);
  evaluate->add_option("--embeddings", eval_embeddings)->required();
  evaluate->add_option("--probe", eval_probe)->required()->check(CLI::IsMember({"rgr", "mcc"}));
  evaluate->add_option("--lambda", eval_lambda);
  evaluate->add_option("--pca-k", eval_pca_k);
  evaluate->add_option("--folds", eval_folds);
  evaluate->add_option("--seed", eval_seed);
  evaluate->add_option("--out", eval_out)->required();
  evaluate->add_option("--format", eval_format)->check(CLI::IsMember({"csv", "json"}));
  evaluate->add_option("--mse", eval_mse, "density | cdf")->check(CLI::IsMember({"density", "cdf"}));

  auto* transfer = app.add_subcommand("transfer", "zero-shot transfer evaluations");
  transfer->require_subcommand(1);

  std::string rel_pairs;
  std::string rel_probe;
  std::string rel_embeddings;
  std::string rel_attribute;
  double rel_tau = 0.1;
  bool rel_adjacent = false;
  auto* relative = transfer->add_subcommand("relative", "relative comparisons (object_a, object_b, attribute, label)");
  relative->add_option("--pairs", rel_pairs)->required();
  relative->add_option("--probe-file", rel_probe)->required();
  relative->add_option("--embeddings", rel_embeddings)->required();
  relative->add_option("--attribute", rel_attribute)->required();
  relative->add_option("--tau", rel_tau, "rgr 'similar' threshold in log10 units");
  relative->add_flag("--adjacent-similar", rel_adjacent, "mcc: buckets one apart count as similar");

  std::string price_products;
  std::string price_probe;
  std::string price_embeddings;
  auto* price = transfer->add_subcommand("price", "score a base-4 probe on product price distributions");
  price->add_option("--products", price_products, "JSON array of distributions")->required();
  price->add_option("--probe-file", price_probe)->required();
  price->add_option("--embeddings", price_embeddings)->required();

  DataOptions ub_data;
  auto* upper = app.add_subcommand("upper-bound", "expected accuracy of sampling from the truth");
  add_data_options(upper, ub_data);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*canonicalize) return run_canonicalize(in_path, out_path, stats_path);

    if (*distributions) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& d : load_distributions(dist_opts)) arr.push_back(sp::distribution_to_json(d));
      write_json(arr, dist_out);
      return 0;
    }

    if (*train) {
      auto data = load_distributions(train_data);
      auto table = sp::load_table(train_embeddings);
      auto kind = sp::parse_probe_kind(train_probe);
      auto inputs = sp::intersect(data, table);
      if (inputs.objects.empty()) throw sp::ValidationError("no data object has an embedding");
      sp::TrainConfig cfg;
      cfg.pca_k = train_pca_k;
      auto model = sp::fit_probe(kind, sp::training_set(inputs.objects, table), sp::BucketScheme(train_data.base, train_data.min_exp),
                                 train_lambda.value_or(sp::default_lambda(kind)), cfg);
      write_json(sp::to_json(model), train_out);
      std::cerr << "trained " << train_probe << " on " << inputs.objects.size() << " objects (" << inputs.dropped
                << " without embeddings)\n";
      return 0;
    }

    if (*evaluate) {
      auto data = load_distributions(eval_data);
      auto table = sp::load_table(eval_embeddings);
      sp::CvConfig cfg;
      cfg.kind = sp::parse_probe_kind(eval_probe);
      cfg.lambda = eval_lambda.value_or(sp::default_lambda(cfg.kind));
      cfg.train.pca_k = eval_pca_k;
      cfg.seed = eval_seed;
      cfg.n_folds = eval_folds;
      cfg.scheme = sp::BucketScheme(eval_data.base, eval_data.min_exp);
      cfg.mse_variant = eval_mse == "cdf" ? sp::MseVariant::kCdf : sp::MseVariant::kDensity;
      auto report = sp::run_cv(data, table, cfg);
      sp::emit_report(report, eval_format == "json" ? sp::ReportFormat::kJson : sp::ReportFormat::kCsv, eval_out);
      return 0;
    }

    if (*relative) {
      auto model = sp::probe_from_json(read_json(rel_probe));
      auto table = sp::load_table(rel_embeddings);
      auto pairs = sp::load_pairs_file(rel_pairs);
      auto result = sp::eval_relative(model, table, pairs, sp::parse_attribute(rel_attribute), rel_tau, rel_adjacent);
      std::cout << nlohmann::json{{"accuracy", result.accuracy}, {"evaluated", result.evaluated}, {"skipped", result.skipped}}.dump()
                << '\n';
      return 0;
    }

    if (*price) {
      auto model = sp::probe_from_json(read_json(price_probe));
      auto table = sp::load_table(price_embeddings);
      auto products_json = read_json(price_products);
      if (!products_json.is_array()) throw sp::ValidationError("products file must hold a JSON array");
      std::vector<sp::NamedDistribution> products;
      for (const auto& p : products_json) {
        auto d = sp::distribution_from_json(p);
        products.push_back({d.object, d.distribution});
      }
      auto result = sp::eval_price_transfer(model, table, products);
      std::cout << nlohmann::json{{"accuracy", result.metrics.accuracy},
                                  {"mse", result.metrics.mse},
                                  {"emd", result.metrics.emd / sp::kNumBuckets},
                                  {"emd_unnormalized", result.metrics.emd},
                                  {"evaluated", result.evaluated},
                                  {"skipped", result.skipped}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*upper) {
      std::vector<sp::EmpiricalDistribution> dists;
      for (const auto& d : load_distributions(ub_data)) dists.push_back(d.distribution);
      std::cout << sp::sampling_upper_bound(dists) << '\n';
      return 0;
    }
  } catch (const sp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
