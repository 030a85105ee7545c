#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>

namespace wcfuzz::vm {

inline constexpr std::size_t kMapSize = 65536;

/// Bitmap cell for a transition into block `cur_id`. `prev_location` is the
/// previous block id already shifted right by one, which keeps a->b and b->a
/// apart and keeps self-loops off cell 0.
constexpr std::uint16_t bitmap_index(std::uint16_t cur_id, std::uint16_t prev_location) {
  return static_cast<std::uint16_t>(cur_id ^ prev_location);
}

/// AFL-style coverage map of saturating hit counters.
struct Bitmap {
  std::array<std::uint8_t, kMapSize> cells{};
  std::uint16_t prev_location = 0;
  /// Increments attempted, including those lost to saturation.
  std::uint64_t transitions = 0;

  void clear() {
    std::memset(cells.data(), 0, cells.size());
    prev_location = 0;
    transitions = 0;
  }

  void record(std::uint16_t block_id) {
    auto& cell = cells[bitmap_index(block_id, prev_location)];
    if (cell != 0xff) ++cell;
    prev_location = static_cast<std::uint16_t>(block_id >> 1);
    ++transitions;
  }
};

}  // namespace wcfuzz::vm
