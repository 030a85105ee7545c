#include "wcfuzz/vm/execution.hpp"

#include <algorithm>
#include <stdexcept>

#include "wcfuzz/vm/machine.hpp"

namespace wcfuzz::vm {

std::int64_t concrete_binary(Opcode op, std::int64_t a, std::int64_t b) {
  auto ua = static_cast<std::uint64_t>(a);
  auto ub = static_cast<std::uint64_t>(b);
  switch (op) {
    case Opcode::add: return static_cast<std::int64_t>(ua + ub);
    case Opcode::sub: return static_cast<std::int64_t>(ua - ub);
    case Opcode::mul: return static_cast<std::int64_t>(ua * ub);
    case Opcode::div:
      if (a == std::numeric_limits<std::int64_t>::min() && b == -1) return a;
      return a / b;
    case Opcode::mod:
      if (b == -1) return 0;
      return a % b;
    case Opcode::band: return a & b;
    case Opcode::bor: return a | b;
    case Opcode::bxor: return a ^ b;
    case Opcode::shl: return static_cast<std::int64_t>(ua << (ub & 63));
    case Opcode::shr: return a >> (ub & 63);
    default: throw std::logic_error("not a binary opcode");
  }
}

namespace {

struct ConcreteOps {
  using Value = std::int64_t;
  static constexpr bool kSymbolic = false;

  Value constant(std::int64_t c) const { return c; }
  std::int64_t concrete(Value v) const { return v; }
  bool is_symbolic(Value) const { return false; }
  Value binary(Opcode op, Value a, Value b, std::size_t) const { return concrete_binary(op, a, b); }
  Value negate(Value a, std::size_t) const {
    return static_cast<std::int64_t>(0 - static_cast<std::uint64_t>(a));
  }
  std::int64_t index(Value v, std::size_t) const { return v; }
  std::int64_t amount(Value v, std::size_t) const { return v; }
  void add_cost(Value& acc, Value amount) const {
    acc = static_cast<std::int64_t>(static_cast<std::uint64_t>(acc) + static_cast<std::uint64_t>(amount));
  }
};

Status to_status(Event event) {
  switch (event) {
    case Event::halted: return Status::ok;
    case Event::timed_out: return Status::timeout;
    default: return Status::error;
  }
}

}  // namespace

std::string_view to_string(CostModel model) {
  switch (model) {
    case CostModel::jumps: return "jumps";
    case CostModel::peak_alloc: return "peak_alloc";
    case CostModel::user_defined: return "user_defined";
  }
  return "?";
}

std::optional<CostModel> parse_cost_model(std::string_view text) {
  if (text == "jumps") return CostModel::jumps;
  if (text == "peak_alloc" || text == "memory") return CostModel::peak_alloc;
  if (text == "user_defined" || text == "user") return CostModel::user_defined;
  return std::nullopt;
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::ok: return "ok";
    case Status::error: return "error";
    case Status::timeout: return "timeout";
  }
  return "?";
}

std::uint64_t select_cost(CostModel model, std::uint64_t jumps, std::int64_t peak_alloc,
                          std::int64_t user_cost) {
  switch (model) {
    case CostModel::jumps: return jumps;
    case CostModel::peak_alloc: return static_cast<std::uint64_t>(std::max<std::int64_t>(0, peak_alloc));
    case CostModel::user_defined: return static_cast<std::uint64_t>(std::max<std::int64_t>(0, user_cost));
  }
  return 0;
}

struct Interpreter::Impl {
  const Program& program;
  CostModel cost_model;
  std::uint64_t budget;
  MachineState<std::int64_t> state;
  ConcreteOps ops;
};

Interpreter::Interpreter(const Program& program, CostModel cost_model, std::uint64_t budget)
    : impl_(std::make_unique<Impl>(Impl{program, cost_model, budget, {}, {}})) {
  if (budget == 0) throw std::invalid_argument("instruction budget must be positive");
}

Interpreter::~Interpreter() = default;

Interpreter::Summary Interpreter::run(std::span<const std::uint8_t> input, Bitmap* bitmap) {
  auto& s = impl_->state;
  const auto& program = impl_->program;
  if (bitmap != nullptr) bitmap->clear();
  s.bitmap = bitmap;
  if (input.size() < program.input_layout.byte_length()) {
    s.counters.assign(program.counters.size(), 0);
    return {0, Status::error, 0, 0};
  }
  s.inputs = program.input_layout.decode(input);
  reset_state<std::int64_t>(program, s, 0);
  Event event = vm::run(program, s, impl_->ops, impl_->budget);
  Summary summary;
  summary.status = to_status(event);
  summary.instructions = s.steps;
  summary.jumps = s.jumps;
  summary.cost = select_cost(impl_->cost_model, s.jumps, s.peak_alloc, s.user_cost);
  return summary;
}

std::span<const std::int64_t> Interpreter::counters() const { return impl_->state.counters; }

ExecutionResult execute(const Program& program, std::span<const std::uint8_t> input,
                        CostModel cost_model, std::uint64_t budget) {
  if (budget == 0) throw std::invalid_argument("instruction budget must be positive");
  ExecutionResult result;
  result.bitmap = std::make_unique<Bitmap>();
  if (input.size() < program.input_layout.byte_length()) {
    result.status = Status::error;
    result.fault = "input has " + std::to_string(input.size()) + " bytes, layout needs " +
                   std::to_string(program.input_layout.byte_length());
    result.counters.assign(program.counters.size(), 0);
    return result;
  }
  MachineState<std::int64_t> s;
  s.bitmap = result.bitmap.get();
  s.inputs = program.input_layout.decode(input);
  result.decoded_input = s.inputs;
  reset_state<std::int64_t>(program, s, 0);
  ConcreteOps ops;
  Event event = run(program, s, ops, budget);
  result.status = to_status(event);
  result.cost = select_cost(cost_model, s.jumps, s.peak_alloc, s.user_cost);
  result.counters = std::move(s.counters);
  result.instructions = s.steps;
  result.jumps = s.jumps;
  result.fault = std::move(s.fault);
  return result;
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t u64() { return read(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(read(1)); }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw std::invalid_argument("truncated execution record");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  std::uint64_t read(std::size_t n) {
    auto raw = bytes(n);
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(raw[b]) << (8 * b);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kRecordVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize(const ExecutionResult& result, bool include_bitmap) {
  std::vector<std::uint8_t> out{'W', 'C', 'E', 'R', kRecordVersion};
  out.push_back(static_cast<std::uint8_t>(result.status));
  bool with_bitmap = include_bitmap && result.bitmap != nullptr;
  out.push_back(with_bitmap ? 1 : 0);
  put_u64(out, result.cost);
  put_u64(out, result.instructions);
  put_u64(out, result.jumps);
  put_u32(out, static_cast<std::uint32_t>(result.decoded_input.size()));
  for (auto v : result.decoded_input) put_u64(out, static_cast<std::uint64_t>(v));
  put_u32(out, static_cast<std::uint32_t>(result.counters.size()));
  for (auto v : result.counters) put_u64(out, static_cast<std::uint64_t>(v));
  if (with_bitmap) {
    out.insert(out.end(), result.bitmap->cells.begin(), result.bitmap->cells.end());
    out.push_back(static_cast<std::uint8_t>(result.bitmap->prev_location));
    out.push_back(static_cast<std::uint8_t>(result.bitmap->prev_location >> 8));
  }
  return out;
}

ExecutionResult deserialize_result(std::span<const std::uint8_t> record) {
  Reader in(record);
  auto magic = in.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "WCER")) throw std::invalid_argument("bad record magic");
  if (in.u8() != kRecordVersion) throw std::invalid_argument("unsupported record version");
  ExecutionResult result;
  std::uint8_t status = in.u8();
  if (status > static_cast<std::uint8_t>(Status::timeout)) throw std::invalid_argument("bad status");
  result.status = static_cast<Status>(status);
  std::uint8_t flags = in.u8();
  result.cost = in.u64();
  result.instructions = in.u64();
  result.jumps = in.u64();
  result.decoded_input.resize(in.u32());
  for (auto& v : result.decoded_input) v = static_cast<std::int64_t>(in.u64());
  result.counters.resize(in.u32());
  for (auto& v : result.counters) v = static_cast<std::int64_t>(in.u64());
  if ((flags & 1) != 0) {
    result.bitmap = std::make_unique<Bitmap>();
    auto cells = in.bytes(kMapSize);
    std::copy(cells.begin(), cells.end(), result.bitmap->cells.begin());
    auto lo = in.u8();
    auto hi = in.u8();
    result.bitmap->prev_location = static_cast<std::uint16_t>(lo | (hi << 8));
  }
  if (!in.done()) throw std::invalid_argument("trailing bytes in execution record");
  return result;
}

}  // namespace wcfuzz::vm
