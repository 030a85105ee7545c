#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wcfuzz/concolic/assess.hpp"
#include "wcfuzz/fuzzer/fuzzer.hpp"
#include "wcfuzz/trie/trie.hpp"
#include "wcfuzz/vm/execution.hpp"

namespace wcfuzz::coordinator {

enum class Mode : std::uint8_t { badger, kelinciwca, kelinci, symexe };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

/// Display order for comparison tables.
inline constexpr Mode kModeOrder[] = {Mode::badger, Mode::kelinciwca, Mode::kelinci, Mode::symexe};

using History = std::vector<std::pair<double, std::uint64_t>>;

struct SymExeConfig {
  const vm::Program* program = nullptr;
  vm::Bytes seed_input;
  vm::CostModel cost_model = vm::CostModel::jumps;
  std::filesystem::path sync_dir;
  std::string instance_id = "symexe";
  /// Import peers' queue files every this many iterations; 0 disables imports.
  std::size_t import_interval = 10;
  std::size_t bse_depth = 1;
  trie::Heuristic heuristic = trie::Heuristic::lower;
  double budget_seconds = 60;
  /// Iteration budget; zero means no limit.
  std::uint64_t max_iterations = 0;
  std::optional<std::uint64_t> stop_at_cost;
  std::uint64_t instruction_budget = vm::kDefaultBudget;
  /// Per-query solver time limit; also capped by the campaign budget.
  double solver_timeout_seconds = 2;
  /// With peers present, each iteration that exports nothing adds a
  /// millisecond of sleep before the next one, up to this cap. Zero disables.
  double idle_backoff_max_ms = 50;
  std::optional<std::size_t> collision_counter;
  double stats_flush_seconds = 10;
  std::optional<std::chrono::steady_clock::time_point> epoch;
};

struct SymExeReport {
  std::uint64_t best_cost = 0;
  vm::Bytes best_input;
  History history;
  std::uint64_t iterations = 0;
  std::uint64_t exported = 0;
  std::uint64_t imported = 0;
  std::uint64_t solver_calls = 0;
  /// Solver calls observed during replay_to_node and bounded_explore.
  std::uint64_t explore_solver_calls = 0;
  std::uint64_t divergences = 0;
  std::uint64_t solver_timeouts = 0;
  std::int64_t max_collisions = 0;
  std::size_t trie_nodes = 0;
  /// Every assessment in order, for export-policy audits.
  std::vector<concolic::AssessmentRecord> audit;
  /// Final trie dump.
  std::string trie_dump;
};

/// The concolic worker: assesses the seed (or imported fuzzer files), then
/// repeats select, replay, explore, solve, generate, assess, exporting
/// interesting inputs to `<sync>/<instance>/queue`. Without peers it stops
/// once no trie node has unexplored choices.
SymExeReport run_symexe(const SymExeConfig& config, std::stop_token stop = {});

struct CampaignConfig {
  std::string subject = "insertion_sort";
  std::optional<std::size_t> n;
  /// Defaults to the subject's manifest.
  std::optional<vm::CostModel> cost_model;
  Mode mode = Mode::badger;
  double budget_seconds = 60;
  std::uint64_t rng_seed = 1;
  std::size_t import_interval = 10;
  std::size_t bse_depth = 1;
  trie::Heuristic heuristic = trie::Heuristic::lower;
  std::filesystem::path sync_dir = "out";
  std::optional<std::uint64_t> stop_at_cost;
  /// Iteration-count budgets for reproducible runs; zero means unlimited.
  std::uint64_t fuzz_max_execs = 0;
  std::uint64_t symexe_max_iterations = 0;
  /// Overrides the subject's seed input.
  std::optional<vm::Bytes> seed_input;
};

struct CampaignStats {
  std::string subject;
  Mode mode = Mode::badger;
  vm::CostModel cost_model = vm::CostModel::jumps;
  std::size_t n = 0;
  std::uint64_t seed_cost = 0;
  vm::Status seed_status = vm::Status::ok;
  std::uint64_t best_cost = 0;
  vm::Bytes best_input;
  double elapsed_s = 0;
  /// Per worker ("fuzzer", "symexe") best-cost series.
  std::map<std::string, History> histories;
  /// Pointwise maximum of the worker series.
  History merged;
  std::int64_t max_collisions = 0;
  std::optional<std::size_t> collision_counter;
  std::optional<fuzzer::FuzzReport> fuzz;
  std::optional<SymExeReport> symexe;
  std::uint64_t solver_queries = 0;
  std::uint64_t trie_operations = 0;
  /// Worker failure; the stats are partial when set.
  std::optional<std::string> error;

  double slowdown() const;
};

/// Runs one campaign and writes `stats_merged.csv` and `report.txt` to the
/// sync directory. Throws std::invalid_argument for an unknown subject or an
/// invalid configuration.
CampaignStats run_campaign(const CampaignConfig& config, std::stop_token stop = {});

History merge_histories(const std::vector<const History*>& histories);

std::string hex(std::span<const std::uint8_t> bytes);

/// `key: value` lines.
std::string format_report(const CampaignStats& stats);

}  // namespace wcfuzz::coordinator
