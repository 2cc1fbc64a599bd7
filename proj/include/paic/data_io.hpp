#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "paic/model.hpp"

namespace paic {

// CSV with a header row. Column `y` is required, `n_trials` is optional; no
// other columns are accepted. Values must parse completely as finite numbers
// (n_trials as positive integers). Errors are Validation and name the line.
ObservationSet parse_observations_csv(std::istream& in, const std::string& source = "<stream>");
ObservationSet read_observations_csv(const std::filesystem::path& path);

// Splits one CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

// Strict full-string parse; nullopt on any trailing garbage or non-finite value.
std::optional<double> parse_finite_double(const std::string& text);

}  // namespace paic
