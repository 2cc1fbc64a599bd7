#include "paic/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "paic/error.hpp"

namespace paic {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::Validation, source + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos
                                                                    : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_finite_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

ObservationSet parse_observations_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(source, 1, "missing header row");
  ++line_no;
  const auto header = split_csv_line(line);
  int y_col = -1, n_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") {
      y_col = static_cast<int>(c);
    } else if (header[c] == "n_trials") {
      n_col = static_cast<int>(c);
    } else {
      fail(source, line_no, "unknown column '" + header[c] + "'");
    }
  }
  if (y_col < 0) fail(source, line_no, "missing required column 'y'");

  std::vector<double> y;
  std::vector<int> trials;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(source, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                std::to_string(cells.size()));
    }
    const auto v = parse_finite_double(cells[static_cast<std::size_t>(y_col)]);
    if (!v) fail(source, line_no, "invalid y value '" + cells[static_cast<std::size_t>(y_col)] + "'");
    y.push_back(*v);
    if (n_col >= 0) {
      const auto& cell = cells[static_cast<std::size_t>(n_col)];
      int n = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), n);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || n <= 0) {
        fail(source, line_no, "invalid n_trials value '" + cell + "'");
      }
      if (*v < 0 || *v > n || std::floor(*v) != *v) {
        fail(source, line_no, "y must be an integer count in [0, n_trials]");
      }
      trials.push_back(n);
    }
  }
  if (n_col >= 0) return ObservationSet(std::move(y), std::move(trials));
  return ObservationSet(std::move(y));
}

ObservationSet read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open data file " + path.string());
  return parse_observations_csv(in, path.string());
}

}  // namespace paic
