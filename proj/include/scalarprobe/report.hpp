#pragma once

#include "scalarprobe/canonicalizer.hpp"
#include "scalarprobe/eval_harness.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace scalarprobe {

enum class ReportFormat { kCsv, kJson };

// CSV: '#'-prefixed config echo lines, then the header
//   attribute,encoder,probe,subset,n,accuracy,mse,emd,emd_unnormalized
// and one line per row (emd divided by 12, emd_unnormalized as computed).
void emit_report(const EvalReport& report, ReportFormat format, std::ostream& out);
void emit_report(const EvalReport& report, ReportFormat format, const std::string& path);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// {object, attribute, scheme:{base,min_exp,count}, probs:[12], total_count, n_peaks}
nlohmann::json distribution_to_json(const ObjectDistribution& d);
// Reads the same shape; log_median is not stored and comes back as 0.
ObjectDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const canon::CanonicalizationStats& stats);

}  // namespace scalarprobe
