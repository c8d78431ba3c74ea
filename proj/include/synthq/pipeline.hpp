#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthq/eval_stats.hpp"
#include "synthq/qd_metrics.hpp"

namespace synthq {

enum class ReportFormat { json, csv };

ReportFormat parse_report_format(std::string_view name);

/// Stage reports. Every report carries "kind" and "config_hash"; field order
/// is fixed so identical results serialize to identical bytes.
nlohmann::ordered_json qd_report_json(const QDReport& report, std::string_view config_hash);
nlohmann::ordered_json cdp_report_json(const std::vector<ConditionCorrelation>& conditions,
                                       const ThresholdFit& fit, const std::vector<BucketRate>& buckets,
                                       std::string_view config_hash);
nlohmann::ordered_json eval_report_json(const EvalReport& report, std::string_view config_hash);

/// JSON is pretty-printed; CSV layout depends on the report kind
/// (cdp_report -> `condition,r,p,n`).
std::string render_report(const nlohmann::ordered_json& report, ReportFormat format);
void write_report(const nlohmann::ordered_json& report, ReportFormat format,
                  const std::filesystem::path& path);

/// Effective configuration for one subcommand: built-in defaults, then the
/// --config file, then flags. Unknown keys are rejected.
struct RunConfig {
  std::string command;
  nlohmann::json values;  // {"tokenizer": {...}, "scoring": {...}, "<command>": {...}}
  std::string hash;       // SHA-256 of values minus output destinations
};

/// Default configuration covering every subcommand, as accepted by --config.
nlohmann::json default_config();

/// `synthq <args...>` (args exclude the program name). Returns the exit code:
/// 0 success, 1 runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace synthq
