#include "wcfuzz/cli/compare.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace wcfuzz::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t mode_rank(const std::string& mode) {
  for (std::size_t i = 0; i < std::size(coordinator::kModeOrder); ++i)
    if (coordinator::to_string(coordinator::kModeOrder[i]) == mode) return i;
  return std::size(coordinator::kModeOrder);
}

std::string fixed(std::optional<double> v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("-");
}

}  // namespace

coordinator::History read_history_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("{}: cannot open", path.string()));
  std::string line;
  if (!std::getline(in, line) || !trim(line).starts_with("elapsed_s,"))
    throw FormatError(fmt::format("{}: missing 'elapsed_s,...' header", path.string()));
  coordinator::History out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string row = trim(line);
    if (row.empty()) continue;
    auto comma = row.find(',');
    std::optional<double> t;
    std::optional<std::uint64_t> c;
    if (comma != std::string::npos) {
      t = parse_number<double>(std::string_view(row).substr(0, comma));
      c = parse_number<std::uint64_t>(std::string_view(row).substr(comma + 1));
    }
    if (!t || !c || !std::isfinite(*t))
      throw FormatError(fmt::format("{}:{}: expected 'seconds,cost', got '{}'", path.string(), lineno, row));
    out.emplace_back(*t, *c);
  }
  return out;
}

std::map<std::string, std::string> read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("{}: cannot open", path.string()));
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    out[trim(std::string_view(line).substr(0, colon))] = trim(std::string_view(line).substr(colon + 1));
  }
  return out;
}

ComparisonReport compare(const std::vector<fs::path>& sources, std::vector<double> thresholds) {
  if (sources.empty()) throw std::invalid_argument("compare needs at least one stats file");
  ComparisonReport report;
  report.thresholds = std::move(thresholds);
  for (const auto& source : sources) {
    fs::path csv = fs::is_directory(source) ? source / "stats_merged.csv" : source;
    ComparisonRow row;
    row.source = source.string();
    row.history = read_history_csv(csv);
    row.mode = "unknown";
    fs::path report_path = csv.parent_path() / "report.txt";
    if (fs::exists(report_path)) {
      auto kv = read_report(report_path);
      if (kv.count("mode")) row.mode = kv["mode"];
      if (kv.count("subject")) row.subject = kv["subject"];
      if (kv.count("cost_model")) row.cost_model = kv["cost_model"];
      if (kv.count("seed_cost")) {
        row.seed_cost = parse_number<std::uint64_t>(kv["seed_cost"]);
        if (!row.seed_cost) throw FormatError(fmt::format("{}: bad seed_cost", report_path.string()));
      }
    }
    for (const auto& [t, c] : row.history) row.best_cost = std::max(row.best_cost, c);
    if (row.seed_cost)
      row.slowdown = *row.seed_cost ? static_cast<double>(row.best_cost) / static_cast<double>(*row.seed_cost)
                                    : static_cast<double>(std::max<std::uint64_t>(row.best_cost, 1));
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return mode_rank(a.mode) < mode_rank(b.mode); });

  std::uint64_t overall = 0;
  for (const auto& r : report.rows) overall = std::max(overall, r.best_cost);
  for (auto& r : report.rows)
    for (double f : report.thresholds) {
      double goal = std::ceil(f * static_cast<double>(overall));
      std::optional<double> when;
      for (const auto& [t, c] : r.history)
        if (static_cast<double>(c) >= goal) {
          when = t;
          break;
        }
      r.time_to.push_back(when);
    }
  return report;
}

std::string format_table(const ComparisonReport& report) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"mode", "subject", "seed_cost", "best_cost", "slowdown"};
  for (double f : report.thresholds) header.push_back(fmt::format("t@{:g}%", f * 100));
  cells.push_back(header);
  for (const auto& r : report.rows) {
    std::vector<std::string> row = {r.mode, r.subject.empty() ? "-" : r.subject,
                                    r.seed_cost ? std::to_string(*r.seed_cost) : "-", std::to_string(r.best_cost),
                                    fixed(r.slowdown, 3)};
    for (const auto& t : r.time_to) row.push_back(fixed(t, 1));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out += i == 0 ? fmt::format("{:<{}}", row[i], width[i]) : fmt::format("  {:>{}}", row[i], width[i]);
    out += '\n';
  }
  return out;
}

std::string curves_csv(const ComparisonReport& report) {
  std::string out = "mode,source,elapsed_s,best_cost\n";
  for (const auto& r : report.rows)
    for (const auto& [t, c] : r.history) out += fmt::format("{},{},{:.3f},{}\n", r.mode, r.source, t, c);
  return out;
}

}  // namespace wcfuzz::cli
