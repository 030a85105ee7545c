#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "wcfuzz/concolic/concolic.hpp"
#include "wcfuzz/solver/solver.hpp"
#include "wcfuzz/trie/trie.hpp"
#include "wcfuzz/vm/execution.hpp"

namespace wcfuzz::concolic {

enum class AssessMode : std::uint8_t { import_mode, export_mode };

/// Where an assessed input came from.
enum class Origin : std::uint8_t { seed, fuzzer, exploration, maximization };

std::string_view to_string(AssessMode mode);
std::string_view to_string(Origin origin);

struct AssessmentRecord {
  double elapsed_s = 0;
  AssessMode mode = AssessMode::import_mode;
  Origin origin = Origin::seed;
  vm::Bytes input;
  std::uint64_t cost = 0;
  vm::Status status = vm::Status::ok;
  /// Some (site, choice) of the path was new to the trie.
  bool new_coverage = false;
  std::uint64_t highscore_before = 0;
  bool exported = false;
  /// Values of the program's `note` counters after the run.
  std::vector<std::int64_t> counters;
};

/// Runs inputs concolically, extends the trie, and decides what to export.
///
/// Export mode returns inputs with new (site, choice) coverage or a cost
/// above the current highscore. Import mode exports nothing itself, except
/// that under the user-defined model it maximizes the path's symbolic cost
/// and assesses an improving model in export mode right away.
class Assessor {
 public:
  Assessor(const vm::Program& program, vm::CostModel cost_model, trie::Trie& trie,
           std::uint64_t budget = vm::kDefaultBudget);

  std::vector<vm::Bytes> assess(std::span<const vm::Bytes> inputs, AssessMode mode, Origin origin);
  std::vector<vm::Bytes> assess(const vm::Bytes& input, AssessMode mode, Origin origin);

  std::uint64_t highscore() const { return highscore_; }
  const vm::Bytes& best_input() const { return best_input_; }
  bool has_assessed() const { return !audit_.empty(); }
  const std::vector<AssessmentRecord>& audit() const { return audit_; }

  /// Elapsed-seconds source stamped onto audit records.
  void set_clock(std::function<double()> clock) { clock_ = std::move(clock); }
  /// Deadline source for maximization queries.
  void set_deadline(std::function<std::chrono::steady_clock::time_point()> deadline) {
    deadline_ = std::move(deadline);
  }

 private:
  const AssessmentRecord& assess_one(const vm::Bytes& input, AssessMode mode, Origin origin,
                                     std::vector<vm::Bytes>& exported);

  const vm::Program& program_;
  vm::CostModel cost_model_;
  trie::Trie& trie_;
  std::uint64_t budget_;
  std::uint64_t highscore_ = 0;
  vm::Bytes best_input_;
  std::vector<AssessmentRecord> audit_;
  std::function<double()> clock_;
  std::function<std::chrono::steady_clock::time_point()> deadline_;
};

}  // namespace wcfuzz::concolic
