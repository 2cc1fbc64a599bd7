#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace paic {

struct CriterionReport;

inline constexpr const char* kToolVersion = "0.1.0";

// Embedded in every output file.
struct Provenance {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
};

enum class ReportFormat { Json, Csv };

// 17 significant digits, '.' decimal separator regardless of locale.
// Non-finite values print as "nan", "inf" or "-inf".
std::string format_double(double v);

// FNV-1a 64-bit hash of a canonical configuration string, as 16 hex digits.
std::string config_hash(const std::string& canonical_config);

// JSON layout:
//   {"tool_version": str, "config_hash": str, "seed": u64,
//    "reports": [{"criterion", "value", "fit", "penalty", "n", "S", "seed",
//                 "warnings": [str], "error": str|null, "extras": {str: num}}]}
// Non-finite numbers are written as null.
// CSV layout: header
//   criterion,value,fit,penalty,n,S,seed,warnings,error,tool_version,config_hash
// with warnings joined by ';'.
void write_report(std::span<const CriterionReport> reports, ReportFormat format,
                  const std::filesystem::path& path, const Provenance& provenance);

std::string reports_to_json(std::span<const CriterionReport> reports,
                            const Provenance& provenance);

struct ParsedReportFile {
  Provenance provenance;
  std::vector<CriterionReport> reports;
};

ParsedReportFile read_report_json(const std::filesystem::path& path);
ParsedReportFile parse_report_json(const std::string& text);

}  // namespace paic
