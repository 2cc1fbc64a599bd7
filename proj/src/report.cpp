#include "paic/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "paic/criteria.hpp"
#include "paic/error.hpp"

namespace paic {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string config_hash(const std::string& canonical_config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_config) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json report_to_json(const CriterionReport& r) {
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = number_or_null(v);
  return json{{"criterion", r.name},
              {"value", number_or_null(r.value)},
              {"fit", number_or_null(r.fit)},
              {"penalty", number_or_null(r.penalty)},
              {"n", r.n},
              {"S", r.S},
              {"seed", r.seed},
              {"warnings", r.warnings},
              {"error", r.error ? json(*r.error) : json(nullptr)},
              {"extras", extras}};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string reports_to_json(std::span<const CriterionReport> reports,
                            const Provenance& provenance) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  json doc{{"tool_version", provenance.tool_version},
           {"config_hash", provenance.config_hash},
           {"seed", provenance.seed},
           {"reports", arr}};
  return doc.dump(2) + "\n";
}

void write_report(std::span<const CriterionReport> reports, ReportFormat format,
                  const std::filesystem::path& path, const Provenance& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write report " + path.string());
  if (format == ReportFormat::Json) {
    out << reports_to_json(reports, provenance);
  } else {
    out << "criterion,value,fit,penalty,n,S,seed,warnings,error,tool_version,config_hash\n";
    for (const auto& r : reports) {
      std::string warnings;
      for (std::size_t k = 0; k < r.warnings.size(); ++k) {
        if (k) warnings += ';';
        warnings += r.warnings[k];
      }
      out << csv_escape(r.name) << ',' << format_double(r.value) << ','
          << format_double(r.fit) << ',' << format_double(r.penalty) << ',' << r.n << ','
          << r.S << ',' << r.seed << ',' << csv_escape(warnings) << ','
          << csv_escape(r.error.value_or("")) << ',' << provenance.tool_version << ','
          << provenance.config_hash << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing report " + path.string());
}

ParsedReportFile parse_report_json(const std::string& text) {
  ParsedReportFile out;
  try {
    const json doc = json::parse(text);
    out.provenance.tool_version = doc.at("tool_version").get<std::string>();
    out.provenance.config_hash = doc.at("config_hash").get<std::string>();
    out.provenance.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& j : doc.at("reports")) {
      CriterionReport r;
      r.name = j.at("criterion").get<std::string>();
      r.value = number_from(j.at("value"));
      r.fit = number_from(j.at("fit"));
      r.penalty = number_from(j.at("penalty"));
      r.n = j.at("n").get<std::size_t>();
      r.S = j.at("S").get<std::size_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.warnings = j.at("warnings").get<std::vector<std::string>>();
      if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
      if (j.contains("extras")) {
        for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = number_from(v);
      }
      out.reports.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed report JSON: ") + e.what());
  }
  return out;
}

ParsedReportFile read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report_json(ss.str());
}

}  // namespace paic
