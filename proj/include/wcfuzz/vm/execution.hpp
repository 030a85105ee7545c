#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wcfuzz/vm/bitmap.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::vm {

enum class CostModel : std::uint8_t { jumps, peak_alloc, user_defined };

std::string_view to_string(CostModel model);
std::optional<CostModel> parse_cost_model(std::string_view text);

enum class Status : std::uint8_t { ok, error, timeout };

std::string_view to_string(Status status);

inline constexpr std::uint64_t kDefaultBudget = 10'000'000;

struct ExecutionResult {
  std::unique_ptr<Bitmap> bitmap;  // null when not collected
  std::uint64_t cost = 0;
  Status status = Status::ok;
  std::vector<std::int64_t> decoded_input;
  /// Values of the program's `note` counters, aligned with Program::counters.
  std::vector<std::int64_t> counters;
  std::uint64_t instructions = 0;
  std::uint64_t jumps = 0;
  std::string fault;
};

/// Cost of a finished run under `model`. User-defined totals are floored at 0.
std::uint64_t select_cost(CostModel model, std::uint64_t jumps, std::int64_t peak_alloc,
                          std::int64_t user_cost);

/// Runs `program` on `input`. Never throws on VM faults or budget
/// exhaustion; those are reported through the status.
ExecutionResult execute(const Program& program, std::span<const std::uint8_t> input,
                        CostModel cost_model, std::uint64_t budget = kDefaultBudget);

/// Reusable interpreter for hot loops: keeps its buffers between runs and
/// writes coverage into a caller-owned bitmap.
class Interpreter {
 public:
  struct Summary {
    std::uint64_t cost = 0;
    Status status = Status::ok;
    std::uint64_t instructions = 0;
    std::uint64_t jumps = 0;
  };

  Interpreter(const Program& program, CostModel cost_model, std::uint64_t budget = kDefaultBudget);
  ~Interpreter();
  Interpreter(const Interpreter&) = delete;
  Interpreter& operator=(const Interpreter&) = delete;

  /// Clears `bitmap` (when non-null) and runs.
  Summary run(std::span<const std::uint8_t> input, Bitmap* bitmap);

  /// Counters of the most recent run.
  std::span<const std::int64_t> counters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Compact binary record: "WCER", version, status, flags, cost, instruction
/// and jump counts, decoded values, counters, then the bitmap when requested.
std::vector<std::uint8_t> serialize(const ExecutionResult& result, bool include_bitmap = false);
ExecutionResult deserialize_result(std::span<const std::uint8_t> record);

}  // namespace wcfuzz::vm
