#include "scalarprobe/report.hpp"

#include "scalarprobe/error.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace scalarprobe {
namespace {

std::string shortest(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Subset parse_subset(const std::string& s) {
  if (s == "all") return Subset::kAll;
  if (s == "unimodal") return Subset::kUnimodal;
  if (s == "multimodal") return Subset::kMultimodal;
  throw ValidationError("unknown subset '" + s + "'");
}

nlohmann::json config_json(const ReportConfig& c) {
  return {{"lambda", c.lambda},
          {"scheme", {{"base", c.scheme_base}, {"min_exp", c.scheme_min_exp}, {"count", c.scheme_count}}},
          {"seed", c.seed},
          {"n_folds", c.n_folds},
          {"mse_variant", c.mse_variant},
          {"emd_normalization", c.emd_normalization},
          {"standardize", c.standardize},
          {"pca_k", c.pca_k},
          {"pca_threshold", c.pca_threshold},
          {"dropped_objects", c.dropped_objects},
          {"pca_folds", c.pca_folds}};
}

}  // namespace

void emit_report(const EvalReport& report, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::kJson) {
    out << report_to_json(report).dump(2) << '\n';
    return;
  }
  const auto& c = report.config;
  out << "# lambda=" << shortest(c.lambda) << '\n'
      << "# scheme=base:" << c.scheme_base << ",min_exp:" << c.scheme_min_exp << ",count:" << c.scheme_count << '\n'
      << "# seed=" << c.seed << '\n'
      << "# n_folds=" << c.n_folds << '\n'
      << "# mse_variant=" << c.mse_variant << '\n'
      << "# emd_normalization=" << c.emd_normalization << '\n'
      << "# standardize=" << (c.standardize ? "true" : "false") << '\n'
      << "# pca_k=" << c.pca_k << '\n'
      << "# pca_threshold=" << c.pca_threshold << '\n'
      << "# pca_folds=" << c.pca_folds << '\n'
      << "# dropped_objects=" << c.dropped_objects << '\n';
  out << "attribute,encoder,probe,subset,n,accuracy,mse,emd,emd_unnormalized\n";
  for (const auto& r : report.rows) {
    out << csv_field(r.attribute) << ',' << csv_field(r.encoder) << ',' << csv_field(r.probe) << ','
        << to_string(r.subset) << ',' << r.n << ',' << shortest(r.metrics.accuracy) << ','
        << shortest(r.metrics.mse) << ',' << shortest(r.emd_normalized()) << ',' << shortest(r.metrics.emd) << '\n';
  }
}

void emit_report(const EvalReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write report '" + path + "'");
  emit_report(report, format, out);
  if (!out) throw ValidationError("write error on '" + path + "'");
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"attribute", r.attribute},
                    {"encoder", r.encoder},
                    {"probe", r.probe},
                    {"subset", std::string(to_string(r.subset))},
                    {"n", r.n},
                    {"accuracy", r.metrics.accuracy},
                    {"mse", r.metrics.mse},
                    {"emd", r.emd_normalized()},
                    {"emd_unnormalized", r.metrics.emd}});
  }
  return {{"config", config_json(report.config)}, {"rows", rows}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport report;
    const auto& c = j.at("config");
    auto& cfg = report.config;
    cfg.lambda = c.at("lambda").get<double>();
    cfg.scheme_base = c.at("scheme").at("base").get<int>();
    cfg.scheme_min_exp = c.at("scheme").at("min_exp").get<int>();
    cfg.scheme_count = c.at("scheme").at("count").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.n_folds = c.at("n_folds").get<int>();
    cfg.mse_variant = c.at("mse_variant").get<std::string>();
    cfg.emd_normalization = c.at("emd_normalization").get<std::string>();
    cfg.standardize = c.at("standardize").get<bool>();
    cfg.pca_k = c.at("pca_k").get<int>();
    cfg.pca_threshold = c.at("pca_threshold").get<int>();
    cfg.dropped_objects = c.at("dropped_objects").get<std::size_t>();
    cfg.pca_folds = c.value("pca_folds", std::size_t{0});
    for (const auto& r : j.at("rows")) {
      report.rows.push_back({r.at("attribute").get<std::string>(), r.at("encoder").get<std::string>(),
                             r.at("probe").get<std::string>(), parse_subset(r.at("subset").get<std::string>()),
                             r.at("n").get<std::size_t>(),
                             {r.at("accuracy").get<double>(), r.at("mse").get<double>(),
                              r.at("emd_unnormalized").get<double>()}});
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

nlohmann::json distribution_to_json(const ObjectDistribution& d) {
  const auto& s = d.distribution.scheme();
  return {{"object", d.object},
          {"attribute", std::string(to_string(d.attribute))},
          {"scheme", {{"base", s.base()}, {"min_exp", s.min_exp()}, {"count", s.count()}}},
          {"probs", std::vector<double>(d.distribution.probs().begin(), d.distribution.probs().end())},
          {"total_count", d.distribution.total_count()},
          {"n_peaks", d.modality.n_peaks}};
}

ObjectDistribution distribution_from_json(const nlohmann::json& j) {
  try {
    const auto& s = j.at("scheme");
    BucketScheme scheme(s.at("base").get<int>(), s.at("min_exp").get<int>(), s.at("count").get<int>());
    auto values = j.at("probs").get<std::vector<double>>();
    if (values.size() != kNumBuckets) throw ValidationError("probs must have 12 entries");
    Probs p{};
    std::copy(values.begin(), values.end(), p.begin());
    EmpiricalDistribution dist(scheme, p, j.value("total_count", std::int64_t{1}));
    ModalityLabel m = detect_modality(dist);
    if (j.contains("n_peaks")) {
      m.n_peaks = j["n_peaks"].get<int>();
      m.label = m.n_peaks == 1 ? Modality::kUnimodal : Modality::kMultimodal;
    }
    Attribute a = j.contains("attribute") ? parse_attribute(j["attribute"].get<std::string>()) : Attribute::kPrice;
    return {j.at("object").get<std::string>(), a, std::move(dist), 0.0, m};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed distribution: ") + e.what());
  }
}

nlohmann::json stats_to_json(const canon::CanonicalizationStats& stats) {
  return {{"literals_rewritten", stats.literals_rewritten},
          {"literals_skipped", stats.literals_skipped},
          {"bytes_in", stats.bytes_in},
          {"bytes_out", stats.bytes_out}};
}

}  // namespace scalarprobe
