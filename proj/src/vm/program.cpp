#include "wcfuzz/vm/program.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <optional>
#include <random>
#include <unordered_map>

namespace wcfuzz::vm {

namespace {

struct MnemonicInfo {
  Opcode op;
  enum class Arg { none, imm, local, label, counter } arg;
};

const std::unordered_map<std::string_view, MnemonicInfo>& mnemonics() {
  using A = MnemonicInfo::Arg;
  static const std::unordered_map<std::string_view, MnemonicInfo> table{
      {"push", {Opcode::push, A::imm}},   {"pop", {Opcode::pop, A::none}},
      {"dup", {Opcode::dup, A::none}},    {"swap", {Opcode::swap, A::none}},
      {"over", {Opcode::over, A::none}},  {"load", {Opcode::load, A::local}},
      {"store", {Opcode::store, A::local}}, {"in", {Opcode::in, A::none}},
      {"nin", {Opcode::nin, A::none}},    {"ld", {Opcode::ld, A::none}},
      {"st", {Opcode::st, A::none}},      {"add", {Opcode::add, A::none}},
      {"sub", {Opcode::sub, A::none}},    {"mul", {Opcode::mul, A::none}},
      {"div", {Opcode::div, A::none}},    {"mod", {Opcode::mod, A::none}},
      {"neg", {Opcode::neg, A::none}},    {"and", {Opcode::band, A::none}},
      {"or", {Opcode::bor, A::none}},     {"xor", {Opcode::bxor, A::none}},
      {"shl", {Opcode::shl, A::none}},    {"shr", {Opcode::shr, A::none}},
      {"jmp", {Opcode::jmp, A::label}},   {"jz", {Opcode::jz, A::label}},
      {"jnz", {Opcode::jnz, A::label}},   {"jeq", {Opcode::jeq, A::label}},
      {"jne", {Opcode::jne, A::label}},   {"jlt", {Opcode::jlt, A::label}},
      {"jle", {Opcode::jle, A::label}},   {"jgt", {Opcode::jgt, A::label}},
      {"jge", {Opcode::jge, A::label}},   {"call", {Opcode::call, A::label}},
      {"ret", {Opcode::ret, A::none}},    {"cost", {Opcode::cost, A::none}},
      {"alloc", {Opcode::alloc, A::none}}, {"free", {Opcode::free, A::none}},
      {"note", {Opcode::note, A::counter}}, {"halt", {Opcode::halt, A::none}},
      {"fail", {Opcode::fail, A::none}},
  };
  return table;
}

struct Token {
  std::string text;
  std::uint32_t column;
};

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.';
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  return std::all_of(s.begin() + 1, s.end(), is_ident_char);
}

std::vector<Token> tokenize(std::string_view line, std::uint32_t lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#' || c == ';') break;
    std::size_t start = i;
    if (c == '\'') {
      // Character literal: 'x' or '\n'-style escapes.
      std::size_t end = line.find('\'', i + 2);
      if (end == std::string_view::npos)
        throw ParseError(lineno, static_cast<std::uint32_t>(i + 1), "unterminated character literal");
      i = end + 1;
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
             line[i] != '#' && line[i] != ';')
        ++i;
    }
    out.push_back({std::string(line.substr(start, i - start)), static_cast<std::uint32_t>(start + 1)});
  }
  return out;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
  if (s.size() >= 3 && s.front() == '\'' && s.back() == '\'') {
    std::string_view body = s.substr(1, s.size() - 2);
    if (body.size() == 1) return static_cast<unsigned char>(body[0]);
    if (body.size() == 2 && body[0] == '\\') {
      switch (body[1]) {
        case 'n': return '\n';
        case 't': return '\t';
        case '0': return 0;
        case '\\': return '\\';
        case '\'': return '\'';
        default: return std::nullopt;
      }
    }
    return std::nullopt;
  }
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t magnitude = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), magnitude, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (negative) {
    if (magnitude > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1)
      return std::nullopt;
    return static_cast<std::int64_t>(0 - magnitude);
  }
  if (magnitude > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    return std::nullopt;
  return static_cast<std::int64_t>(magnitude);
}

Interval natural_range(unsigned width, bool is_signed) {
  if (width == 64) {
    if (is_signed)
      return {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()};
    // Unsigned 64-bit values do not fit the VM's word; cap at INT64_MAX.
    return {0, std::numeric_limits<std::int64_t>::max()};
  }
  if (is_signed) {
    std::int64_t half = std::int64_t{1} << (width - 1);
    return {-half, half - 1};
  }
  return {0, (std::int64_t{1} << width) - 1};
}

InputField parse_input_directive(const std::vector<Token>& toks, std::uint32_t lineno) {
  if (toks.size() < 2 || !is_identifier(toks[1].text))
    throw ParseError(lineno, toks[0].column, ".input requires a field name");
  InputField field;
  field.name = toks[1].text;
  field.count = 1;
  std::optional<std::int64_t> min, max;
  for (std::size_t t = 2; t < toks.size(); ++t) {
    const auto& tok = toks[t];
    if (tok.text == "signed") {
      field.is_signed = true;
      continue;
    }
    if (tok.text == "unsigned") {
      field.is_signed = false;
      continue;
    }
    auto eq = tok.text.find('=');
    if (eq == std::string::npos)
      throw ParseError(lineno, tok.column, "unexpected token '" + tok.text + "' in .input");
    std::string key = tok.text.substr(0, eq);
    auto value = parse_integer(std::string_view(tok.text).substr(eq + 1));
    if (!value)
      throw ParseError(lineno, tok.column, "invalid integer in '" + tok.text + "'");
    if (key == "count") {
      if (*value < 1) throw ParseError(lineno, tok.column, "count must be positive");
      field.count = static_cast<std::size_t>(*value);
    } else if (key == "width") {
      if (*value != 8 && *value != 16 && *value != 32 && *value != 64)
        throw ParseError(lineno, tok.column, "width must be 8, 16, 32 or 64");
      field.width_bits = static_cast<unsigned>(*value);
    } else if (key == "min") {
      min = *value;
    } else if (key == "max") {
      max = *value;
    } else {
      throw ParseError(lineno, tok.column, "unknown .input key '" + key + "'");
    }
  }
  Interval natural = natural_range(field.width_bits, field.is_signed);
  field.min = min.value_or(natural.lo);
  field.max = max.value_or(natural.hi);
  if (field.min > field.max || field.min < natural.lo || field.max > natural.hi)
    throw ParseError(lineno, toks[0].column, "value range of '" + field.name +
                                                 "' must be non-empty and fit the field width");
  return field;
}

}  // namespace

std::string_view opcode_name(Opcode op) {
  for (const auto& [name, info] : mnemonics())
    if (info.op == op) return name;
  return "?";
}

ParseError::ParseError(std::uint32_t line, std::uint32_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + what),
      line_(line),
      column_(column) {}

InputLayout::InputLayout(std::vector<InputField> fields) : fields_(std::move(fields)) {
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    std::size_t width = fields_[f].width_bits / 8;
    for (std::size_t k = 0; k < fields_[f].count; ++k) {
      slots_.push_back({byte_length_, width, f});
      byte_length_ += width;
    }
  }
  value_count_ = slots_.size();
}

Interval InputLayout::domain(std::size_t index) const {
  const auto& field = fields_.at(slots_.at(index).field);
  return {field.min, field.max};
}

std::pair<std::size_t, std::size_t> InputLayout::byte_span(std::size_t index) const {
  const auto& slot = slots_.at(index);
  return {slot.offset, slot.bytes};
}

std::vector<std::int64_t> InputLayout::decode(std::span<const std::uint8_t> input) const {
  if (input.size() < byte_length_)
    throw std::invalid_argument("input has " + std::to_string(input.size()) +
                                " bytes, layout needs " + std::to_string(byte_length_));
  std::vector<std::int64_t> values;
  values.reserve(value_count_);
  for (const auto& slot : slots_) {
    const auto& field = fields_[slot.field];
    std::uint64_t raw = 0;
    for (std::size_t b = 0; b < slot.bytes; ++b)
      raw |= static_cast<std::uint64_t>(input[slot.offset + b]) << (8 * b);
    std::int64_t natural;
    unsigned width = field.width_bits;
    if (field.is_signed && width < 64) {
      std::uint64_t sign = std::uint64_t{1} << (width - 1);
      natural = static_cast<std::int64_t>((raw ^ sign) - sign);
    } else if (!field.is_signed && width == 64) {
      natural = static_cast<std::int64_t>(raw & 0x7fffffffffffffffULL);
    } else {
      natural = static_cast<std::int64_t>(raw);
    }
    if (natural < field.min || natural > field.max) {
      __int128 span = static_cast<__int128>(field.max) - field.min + 1;
      __int128 off = (static_cast<__int128>(natural) - field.min) % span;
      if (off < 0) off += span;
      natural = static_cast<std::int64_t>(field.min + off);
    }
    values.push_back(natural);
  }
  return values;
}

Bytes InputLayout::encode(std::span<const std::int64_t> values) const {
  if (values.size() != value_count_)
    throw std::invalid_argument("expected " + std::to_string(value_count_) + " values, got " +
                                std::to_string(values.size()));
  Bytes out(byte_length_, 0);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& slot = slots_[i];
    const auto& field = fields_[slot.field];
    if (values[i] < field.min || values[i] > field.max)
      throw std::out_of_range("value " + std::to_string(values[i]) + " outside [" +
                              std::to_string(field.min) + ", " + std::to_string(field.max) +
                              "] of field '" + field.name + "'");
    auto raw = static_cast<std::uint64_t>(values[i]);
    for (std::size_t b = 0; b < slot.bytes; ++b)
      out[slot.offset + b] = static_cast<std::uint8_t>(raw >> (8 * b));
  }
  return out;
}

Program load_program(std::string_view source, std::uint64_t id_seed) {
  Program program;
  program.name = "anonymous";
  std::vector<InputField> fields;

  struct PendingJump {
    std::size_t pc;
    std::string label;
    std::uint32_t line, column;
  };
  std::vector<PendingJump> pending;
  std::map<std::string, std::size_t> labels;
  std::map<std::size_t, std::vector<std::string>> labels_at;
  std::unordered_map<std::string, std::size_t> local_index;
  std::unordered_map<std::string, std::size_t> counter_index;
  bool memory_seen = false;

  std::uint32_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t nl = source.find('\n', pos);
    if (nl == std::string_view::npos) nl = source.size();
    std::string_view line = source.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;

    auto toks = tokenize(line, lineno);
    std::size_t t = 0;
    while (t < toks.size() && toks[t].text.size() > 1 && toks[t].text.back() == ':') {
      std::string label = toks[t].text.substr(0, toks[t].text.size() - 1);
      if (!is_identifier(label))
        throw ParseError(lineno, toks[t].column, "invalid label '" + label + "'");
      if (!labels.emplace(label, program.code.size()).second)
        throw ParseError(lineno, toks[t].column, "duplicate label '" + label + "'");
      labels_at[program.code.size()].push_back(label);
      ++t;
    }
    if (t == toks.size()) continue;
    std::vector<Token> rest(toks.begin() + static_cast<std::ptrdiff_t>(t), toks.end());
    const auto& head = rest.front();

    if (head.text.front() == '.') {
      if (head.text == ".program") {
        if (rest.size() != 2 || !is_identifier(rest[1].text))
          throw ParseError(lineno, head.column, ".program requires one name");
        program.name = rest[1].text;
      } else if (head.text == ".input") {
        fields.push_back(parse_input_directive(rest, lineno));
      } else if (head.text == ".memory") {
        if (memory_seen) throw ParseError(lineno, head.column, "duplicate .memory");
        auto cells = rest.size() == 2 ? parse_integer(rest[1].text) : std::nullopt;
        if (!cells || *cells < 0 || *cells > (1 << 24))
          throw ParseError(lineno, head.column, ".memory requires a cell count in [0, 2^24]");
        program.memory_cells = static_cast<std::size_t>(*cells);
        memory_seen = true;
      } else if (head.text == ".locals") {
        for (std::size_t k = 1; k < rest.size(); ++k) {
          if (!is_identifier(rest[k].text))
            throw ParseError(lineno, rest[k].column, "invalid local name '" + rest[k].text + "'");
          if (!local_index.emplace(rest[k].text, program.locals.size()).second)
            throw ParseError(lineno, rest[k].column, "duplicate local '" + rest[k].text + "'");
          program.locals.push_back(rest[k].text);
        }
      } else {
        throw ParseError(lineno, head.column, "unknown directive '" + head.text + "'");
      }
      continue;
    }

    auto it = mnemonics().find(head.text);
    if (it == mnemonics().end())
      throw ParseError(lineno, head.column, "unknown instruction '" + head.text + "'");
    const auto info = it->second;
    using A = MnemonicInfo::Arg;
    std::size_t want = info.arg == A::none ? 1 : 2;
    if (rest.size() != want)
      throw ParseError(lineno, head.column,
                       "'" + head.text + "' takes " + std::to_string(want - 1) + " operand(s)");
    Instruction ins{info.op, 0, lineno, head.column};
    if (want == 2) {
      const auto& arg = rest[1];
      switch (info.arg) {
        case A::imm: {
          auto v = parse_integer(arg.text);
          if (!v) throw ParseError(lineno, arg.column, "invalid integer '" + arg.text + "'");
          ins.operand = *v;
          break;
        }
        case A::local: {
          auto found = local_index.find(arg.text);
          if (found == local_index.end())
            throw ParseError(lineno, arg.column, "undeclared local '" + arg.text + "'");
          ins.operand = static_cast<std::int64_t>(found->second);
          break;
        }
        case A::label:
          if (!is_identifier(arg.text))
            throw ParseError(lineno, arg.column, "invalid label '" + arg.text + "'");
          pending.push_back({program.code.size(), arg.text, lineno, arg.column});
          break;
        case A::counter: {
          if (!is_identifier(arg.text))
            throw ParseError(lineno, arg.column, "invalid counter name '" + arg.text + "'");
          auto [slot, inserted] = counter_index.emplace(arg.text, program.counters.size());
          if (inserted) program.counters.push_back(arg.text);
          ins.operand = static_cast<std::int64_t>(slot->second);
          break;
        }
        case A::none:
          break;
      }
    }
    program.code.push_back(ins);
  }

  if (fields.empty()) throw ParseError(lineno, 1, "missing .input layout");
  if (program.code.empty()) throw ParseError(lineno, 1, "program has no instructions");
  if (labels_at.count(program.code.size()) != 0)
    throw ParseError(lineno, 1, "label '" + labels_at[program.code.size()].front() +
                                    "' is not followed by an instruction");
  program.input_layout = InputLayout(std::move(fields));

  for (const auto& jump : pending) {
    auto found = labels.find(jump.label);
    if (found == labels.end())
      throw ParseError(jump.line, jump.column, "undefined label '" + jump.label + "'");
    program.code[jump.pc].operand = static_cast<std::int64_t>(found->second);
  }

  // Basic blocks start at the entry, at every label, after every conditional
  // branch (fall-through) and after every call (return point).
  std::vector<std::vector<std::string>> starts(program.code.size());
  starts[0].push_back("@entry");
  for (const auto& [pc, names] : labels_at) {
    if (pc == 0) starts[0].clear();
    for (const auto& name : names) starts[pc].push_back(name);
  }
  for (std::size_t pc = 0; pc + 1 < program.code.size(); ++pc) {
    Opcode op = program.code[pc].op;
    if (starts[pc + 1].empty() && is_conditional_branch(op))
      starts[pc + 1].push_back("@fall" + std::to_string(pc + 1));
    else if (starts[pc + 1].empty() && op == Opcode::call)
      starts[pc + 1].push_back("@ret" + std::to_string(pc + 1));
  }

  std::mt19937_64 rng(id_seed);
  program.block_at.assign(program.code.size(), -1);
  for (std::size_t pc = 0; pc < program.code.size(); ++pc) {
    if (starts[pc].empty()) continue;
    auto id = static_cast<std::uint16_t>(rng() & 0xffffu);
    program.block_at[pc] = id;
    for (const auto& name : starts[pc]) program.block_ids.emplace(name, id);
  }
  return program;
}

}  // namespace wcfuzz::vm
