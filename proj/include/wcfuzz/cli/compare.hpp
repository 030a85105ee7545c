#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wcfuzz/coordinator/campaign.hpp"

namespace wcfuzz::cli {

/// Malformed stats or report file; the message names the file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses an `elapsed_s,<value>` CSV with a header row.
coordinator::History read_history_csv(const std::filesystem::path& path);

/// Parses `key: value` lines.
std::map<std::string, std::string> read_report(const std::filesystem::path& path);

struct ComparisonRow {
  std::string source;
  std::string mode;
  std::string subject;
  std::string cost_model;
  std::optional<std::uint64_t> seed_cost;
  std::uint64_t best_cost = 0;
  std::optional<double> slowdown;
  /// First time each threshold fraction of the overall best was reached.
  std::vector<std::optional<double>> time_to;
  coordinator::History history;
};

struct ComparisonReport {
  std::vector<double> thresholds;
  std::vector<ComparisonRow> rows;
};

/// Each source is a campaign directory (with stats_merged.csv and
/// optionally report.txt) or a CSV file; a report.txt next to the CSV
/// supplies mode and seed cost. Rows follow badger, kelinciwca, kelinci,
/// symexe, then unknown modes, keeping argument order within a mode.
ComparisonReport compare(const std::vector<std::filesystem::path>& sources,
                         std::vector<double> thresholds = {0.5, 0.9, 1.0});

std::string format_table(const ComparisonReport& report);

/// Long-format curves: `mode,source,elapsed_s,best_cost`.
std::string curves_csv(const ComparisonReport& report);

}  // namespace wcfuzz::cli
