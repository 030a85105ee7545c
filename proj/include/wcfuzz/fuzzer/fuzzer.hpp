#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wcfuzz/vm/bitmap.hpp"
#include "wcfuzz/vm/execution.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::fuzzer {

/// kelinci admits on coverage only and picks ancestors uniformly;
/// kelinciwca also admits new highscores and weights ancestors by cost.
enum class Mode : std::uint8_t { kelinci, kelinciwca };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

enum class Origin : std::uint8_t { seed, mutation, import };

std::string_view to_string(Origin origin);

struct QueueEntry {
  std::size_t id = 0;
  vm::Bytes input;
  std::uint64_t cost = 0;
  /// Hit a previously unseen (cell, bucket) pair when discovered.
  bool coverage_new = false;
  /// Cost exceeded the highscore at admission.
  bool highscore_new = false;
  std::uint64_t highscore_at_admission = 0;
  Origin origin = Origin::seed;
  bool deterministic_done = false;
};

/// Seen (cell, bucket) pairs: one bit per bucket class for every cell.
struct CoverageSet {
  std::array<std::uint8_t, vm::kMapSize> seen{};
};

/// AFL hit-count classes {1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+} as one
/// bit each; 0 for an untouched cell.
std::uint8_t bucket_bit(std::uint8_t hits);

/// True iff the bitmap hits a (cell, bucket) pair absent from `global`,
/// which is updated in place.
bool classify_coverage(const vm::Bitmap& bitmap, CoverageSet& global);

/// Best cost so far and its improvement series. Time strictly increases
/// between points; a point at the same timestamp replaces the previous one.
struct Highscore {
  std::uint64_t best_cost = 0;
  vm::Bytes best_input;
  std::vector<std::pair<double, std::uint64_t>> history;

  bool empty() const { return history.empty(); }
  /// Records `cost` if it beats the best (or is the first observation).
  bool offer(double elapsed_s, std::uint64_t cost, const vm::Bytes& input);
};

enum class Stage : std::uint8_t { bitflip, arith, interest, havoc };

std::string_view to_string(Stage stage);

inline constexpr std::size_t kHavocCandidates = 256;
inline constexpr int kArithMax = 35;

/// Candidates for one stage. Deterministic stages ignore the rng; havoc
/// draws `havoc_candidates` inputs, each with 1-64 stacked edits. Every
/// candidate has the entry's length.
std::vector<vm::Bytes> mutate(const QueueEntry& entry, std::mt19937_64& rng, Stage stage,
                              std::size_t havoc_candidates = kHavocCandidates);

/// Weighted draw over the queue: weight 1 + cost under kelinciwca, uniform
/// under kelinci.
const QueueEntry& select_ancestor(std::span<const QueueEntry> queue, Mode mode, std::mt19937_64& rng);

struct FuzzConfig {
  const vm::Program* program = nullptr;
  vm::Bytes seed_input;
  vm::CostModel cost_model = vm::CostModel::jumps;
  Mode mode = Mode::kelinciwca;
  std::filesystem::path sync_dir;
  std::string instance_id = "fuzzer";
  /// Wall-clock budget; zero means no time limit.
  double budget_seconds = 60;
  /// Execution budget; zero means no limit.
  std::uint64_t max_execs = 0;
  /// Stop once this cost is reached.
  std::optional<std::uint64_t> stop_at_cost;
  std::uint64_t rng_seed = 1;
  std::size_t sync_every = 8;  // havoc cycles between peer scans
  std::size_t havoc_candidates = kHavocCandidates;
  std::uint64_t instruction_budget = vm::kDefaultBudget;
  double stats_flush_seconds = 10;
  /// Origin of the elapsed-seconds axis; defaults to the loop's start.
  std::optional<std::chrono::steady_clock::time_point> epoch;
};

struct FuzzReport {
  Highscore highscore;
  std::vector<QueueEntry> queue;
  std::uint64_t execs = 0;
  std::uint64_t errors = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t imported = 0;
  std::uint64_t havoc_cycles = 0;
  std::int64_t max_collisions = 0;
};

/// Mutate-execute-classify-admit loop publishing to
/// `<sync>/<instance>/{queue/id_NNNNNN, stats.csv, highscore}` and importing
/// peers' queue files every `sync_every` havoc cycles. Throws
/// std::filesystem::filesystem_error on sync directory failures.
FuzzReport fuzz_loop(const FuzzConfig& config, std::stop_token stop = {},
                     std::optional<std::size_t> collision_counter = std::nullopt);

/// Atomic publication: writes `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string queue_file_name(std::size_t id);

/// Finds queue files published by other instances since the last poll.
class PeerScanner {
 public:
  PeerScanner(std::filesystem::path sync_dir, std::string own_id)
      : sync_dir_(std::move(sync_dir)), own_id_(std::move(own_id)) {}

  /// New files in peer order, then name order. Hidden (temporary) files are
  /// skipped.
  std::vector<std::pair<std::filesystem::path, vm::Bytes>> poll();
  bool has_peers() const;

 private:
  std::filesystem::path sync_dir_;
  std::string own_id_;
  std::map<std::string, std::set<std::string>> seen_;
};

/// `elapsed_s,cost` rows with a header.
std::string history_csv(const std::vector<std::pair<double, std::uint64_t>>& history,
                        std::string_view value_column = "cost");

}  // namespace wcfuzz::fuzzer
