#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wcfuzz::vm {

using Bytes = std::vector<std::uint8_t>;

enum class Opcode : std::uint8_t {
  push, pop, dup, swap, over,
  load, store,
  in, nin,
  ld, st,
  add, sub, mul, div, mod, neg,
  band, bor, bxor, shl, shr,
  jmp, jz, jnz, jeq, jne, jlt, jle, jgt, jge,
  call, ret,
  cost, alloc, free,
  note,
  halt, fail,
};

std::string_view opcode_name(Opcode op);

constexpr bool is_conditional_branch(Opcode op) {
  switch (op) {
    case Opcode::jz: case Opcode::jnz: case Opcode::jeq: case Opcode::jne:
    case Opcode::jlt: case Opcode::jle: case Opcode::jgt: case Opcode::jge:
      return true;
    default:
      return false;
  }
}

struct Instruction {
  Opcode op = Opcode::halt;
  // Immediate for push, slot for load/store, target pc for jumps and call,
  // counter index for note.
  std::int64_t operand = 0;
  std::uint32_t line = 0;
  std::uint32_t column = 0;
};

/// One `.input` directive: `count` consecutive values of the same shape.
///
/// Each value occupies width/8 little-endian bytes. The raw bytes are read as
/// a two's complement (signed) or plain (unsigned) integer and then folded
/// into [min, max] by modular reduction, so every byte string decodes to an
/// in-range value and every in-range value encodes to its natural bytes.
struct InputField {
  std::string name;
  std::size_t count = 0;
  unsigned width_bits = 8;
  bool is_signed = false;
  std::int64_t min = 0;
  std::int64_t max = 255;

  std::size_t byte_length() const { return count * (width_bits / 8); }
};

struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

class InputLayout {
 public:
  InputLayout() = default;
  explicit InputLayout(std::vector<InputField> fields);

  const std::vector<InputField>& fields() const { return fields_; }
  std::size_t byte_length() const { return byte_length_; }
  std::size_t value_count() const { return value_count_; }

  /// Domain of decoded value `index` (0-based over all fields).
  Interval domain(std::size_t index) const;

  /// Decodes the first byte_length() bytes. Throws std::invalid_argument if
  /// the input is shorter than the layout.
  std::vector<std::int64_t> decode(std::span<const std::uint8_t> input) const;

  /// Encodes one value per layout slot. Throws std::out_of_range when a value
  /// lies outside its slot's domain.
  Bytes encode(std::span<const std::int64_t> values) const;

  /// Byte offset and width of value `index`.
  std::pair<std::size_t, std::size_t> byte_span(std::size_t index) const;

 private:
  struct Slot {
    std::size_t offset;
    std::size_t bytes;
    std::size_t field;
  };
  std::vector<InputField> fields_;
  std::vector<Slot> slots_;
  std::size_t byte_length_ = 0;
  std::size_t value_count_ = 0;
};

struct Program {
  std::string name;
  std::vector<Instruction> code;
  InputLayout input_layout;
  /// Block label -> bitmap id in [0, 65536). Implicit blocks (after a
  /// conditional branch or a call) get synthetic labels `@fall<pc>` and
  /// `@ret<pc>`; the entry block is `@entry` unless labelled.
  std::map<std::string, std::uint16_t> block_ids;
  /// Per instruction: id of the block starting there, or -1.
  std::vector<std::int32_t> block_at;
  std::vector<std::string> locals;
  std::vector<std::string> counters;
  std::size_t memory_cells = 0;

  std::size_t block_count() const {
    std::size_t n = 0;
    for (auto id : block_at) n += id >= 0 ? 1 : 0;
    return n;
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::uint32_t line, std::uint32_t column, const std::string& what);

  std::uint32_t line() const { return line_; }
  std::uint32_t column() const { return column_; }

 private:
  std::uint32_t line_;
  std::uint32_t column_;
};

/// Parses IR text. Block ids are drawn from a PRNG seeded with `id_seed`;
/// distinct blocks may collide on the same id.
Program load_program(std::string_view source, std::uint64_t id_seed = 0);

}  // namespace wcfuzz::vm
