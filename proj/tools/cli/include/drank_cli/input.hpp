#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "drank/panel.hpp"
#include "drank/ranked_sample.hpp"

namespace drank::cli {

/// Reads a dataset CSV with a header naming `rank` and `y` columns. Rows
/// whose rank is blank or "censored" are the unranked block; the ranked
/// rows must cover 1..m exactly once.
RankedSample read_ranked_csv(std::istream& in, Tail tail, const std::string& source = "input");
RankedSample read_ranked_csv(const std::filesystem::path& path, Tail tail);

struct PanelInput {
  drank::panel::PanelSeries series;
  std::vector<std::string> covariate_names;
  /// Covariate coefficients per day when the input carried covariates.
  std::vector<std::vector<double>> coefficients;
};

/// Reads a panel CSV with columns day, rank, y and any number of numeric
/// covariate columns. With covariates present each day's y is replaced by
/// the absolute residual of its regression on them.
PanelInput read_panel_csv(std::istream& in, Tail tail, const std::vector<int>& excluded,
                          const std::string& source = "input");
PanelInput read_panel_csv(const std::filesystem::path& path, Tail tail,
                          const std::vector<int>& excluded);

/// Splits on commas that are not inside parentheses, trimming blanks:
/// "identity, gamma(3,3)" -> {"identity", "gamma(3,3)"}.
std::vector<std::string> split_list(const std::string& text);

}  // namespace drank::cli
