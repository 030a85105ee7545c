#pragma once

// Interpreter core shared by the concrete VM and the concolic/symbolic
// engines. The value type and its arithmetic come from an `Ops` policy:
//
//   using Value = ...;
//   static constexpr bool kSymbolic;
//   Value constant(std::int64_t);
//   std::int64_t concrete(const Value&);
//   bool is_symbolic(const Value&);
//   Value binary(Opcode, const Value&, const Value&, std::size_t pc);
//   Value negate(const Value&, std::size_t pc);
//   std::int64_t index(const Value&, std::size_t pc);    // memory/input index
//   std::int64_t amount(const Value&, std::size_t pc);   // alloc/free size
//   void add_cost(Value& acc, const Value& amount);
//
// With a symbolic policy, a conditional branch on a symbolic operand stops the
// run with Event::symbolic_branch; the caller inspects `pending` and resumes
// with take_branch().

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wcfuzz/vm/bitmap.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::vm {

enum class Event : std::uint8_t { halted, faulted, timed_out, symbolic_branch };

inline constexpr std::size_t kMaxStackDepth = 1u << 20;
inline constexpr std::size_t kMaxCallDepth = 1u << 14;

template <class V>
struct PendingBranch {
  std::size_t site = 0;
  Opcode op = Opcode::jeq;  // jz/jnz are normalised to jeq/jne against 0
  V lhs{};
  V rhs{};
  std::size_t target = 0;
  bool concrete_taken = false;
};

template <class V>
struct MachineState {
  std::size_t pc = 0;
  std::vector<V> stack;
  std::vector<V> locals;
  std::vector<V> memory;
  std::vector<V> inputs;
  std::vector<std::size_t> calls;
  std::vector<std::int64_t> counters;
  V user_cost{};
  std::int64_t live_alloc = 0;
  std::int64_t peak_alloc = 0;
  std::uint64_t steps = 0;
  std::uint64_t jumps = 0;
  Bitmap* bitmap = nullptr;
  std::string fault;
  PendingBranch<V> pending;
};

/// Decodes nothing: `inputs` must already hold one value per layout slot.
/// Enters the entry block, which counts as the first transition.
template <class V>
void reset_state(const Program& program, MachineState<V>& s, V zero) {
  s.pc = 0;
  s.stack.clear();
  s.locals.assign(program.locals.size(), zero);
  s.memory.assign(program.memory_cells, zero);
  s.calls.clear();
  s.counters.assign(program.counters.size(), 0);
  s.user_cost = zero;
  s.live_alloc = 0;
  s.peak_alloc = 0;
  s.steps = 0;
  s.jumps = 1;
  s.fault.clear();
  if (s.bitmap != nullptr) s.bitmap->record(static_cast<std::uint16_t>(program.block_at[0]));
}

namespace detail {

template <class V>
inline bool goto_pc(const Program& program, MachineState<V>& s, std::size_t next) {
  if (next >= program.code.size()) {
    s.fault = "control fell off the end of the program";
    return false;
  }
  s.pc = next;
  std::int32_t block = program.block_at[next];
  if (block >= 0) {
    ++s.jumps;
    if (s.bitmap != nullptr) s.bitmap->record(static_cast<std::uint16_t>(block));
  }
  return true;
}

inline bool compare(Opcode op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Opcode::jeq: return a == b;
    case Opcode::jne: return a != b;
    case Opcode::jlt: return a < b;
    case Opcode::jle: return a <= b;
    case Opcode::jgt: return a > b;
    case Opcode::jge: return a >= b;
    default: return false;
  }
}

}  // namespace detail

/// Resumes after Event::symbolic_branch.
template <class V>
bool take_branch(const Program& program, MachineState<V>& s, bool taken) {
  return detail::goto_pc(program, s, taken ? s.pending.target : s.pc + 1);
}

template <class Ops>
Event run(const Program& program, MachineState<typename Ops::Value>& s, Ops& ops,
          std::uint64_t budget) {
  using V = typename Ops::Value;
  const auto& code = program.code;

  auto fault = [&](std::string what) {
    s.fault = std::move(what) + " at line " + std::to_string(code[s.pc].line);
    return Event::faulted;
  };

  for (;;) {
    if (s.steps >= budget) return Event::timed_out;
    ++s.steps;
    const Instruction& ins = code[s.pc];
    const std::size_t pc = s.pc;
    std::size_t next = pc + 1;

    auto need = [&](std::size_t n) { return s.stack.size() >= n; };
    auto pop = [&]() {
      V v = std::move(s.stack.back());
      s.stack.pop_back();
      return v;
    };

    switch (ins.op) {
      case Opcode::push:
        if (s.stack.size() >= kMaxStackDepth) return fault("stack overflow");
        s.stack.push_back(ops.constant(ins.operand));
        break;
      case Opcode::pop:
        if (!need(1)) return fault("stack underflow");
        s.stack.pop_back();
        break;
      case Opcode::dup:
        if (!need(1)) return fault("stack underflow");
        if (s.stack.size() >= kMaxStackDepth) return fault("stack overflow");
        s.stack.push_back(s.stack.back());
        break;
      case Opcode::swap:
        if (!need(2)) return fault("stack underflow");
        std::swap(s.stack[s.stack.size() - 1], s.stack[s.stack.size() - 2]);
        break;
      case Opcode::over:
        if (!need(2)) return fault("stack underflow");
        if (s.stack.size() >= kMaxStackDepth) return fault("stack overflow");
        s.stack.push_back(s.stack[s.stack.size() - 2]);
        break;
      case Opcode::load:
        if (s.stack.size() >= kMaxStackDepth) return fault("stack overflow");
        s.stack.push_back(s.locals[static_cast<std::size_t>(ins.operand)]);
        break;
      case Opcode::store:
        if (!need(1)) return fault("stack underflow");
        s.locals[static_cast<std::size_t>(ins.operand)] = pop();
        break;
      case Opcode::in: {
        if (!need(1)) return fault("stack underflow");
        std::int64_t i = ops.index(s.stack.back(), pc);
        if (i < 0 || static_cast<std::size_t>(i) >= s.inputs.size())
          return fault("input index " + std::to_string(i) + " out of range");
        s.stack.back() = s.inputs[static_cast<std::size_t>(i)];
        break;
      }
      case Opcode::nin:
        if (s.stack.size() >= kMaxStackDepth) return fault("stack overflow");
        s.stack.push_back(ops.constant(static_cast<std::int64_t>(s.inputs.size())));
        break;
      case Opcode::ld: {
        if (!need(1)) return fault("stack underflow");
        std::int64_t a = ops.index(s.stack.back(), pc);
        if (a < 0 || static_cast<std::size_t>(a) >= s.memory.size())
          return fault("memory address " + std::to_string(a) + " out of range");
        s.stack.back() = s.memory[static_cast<std::size_t>(a)];
        break;
      }
      case Opcode::st: {
        if (!need(2)) return fault("stack underflow");
        V value = pop();
        std::int64_t a = ops.index(s.stack.back(), pc);
        s.stack.pop_back();
        if (a < 0 || static_cast<std::size_t>(a) >= s.memory.size())
          return fault("memory address " + std::to_string(a) + " out of range");
        s.memory[static_cast<std::size_t>(a)] = std::move(value);
        break;
      }
      case Opcode::add: case Opcode::sub: case Opcode::mul: case Opcode::div:
      case Opcode::mod: case Opcode::band: case Opcode::bor: case Opcode::bxor:
      case Opcode::shl: case Opcode::shr: {
        if (!need(2)) return fault("stack underflow");
        V b = pop();
        if ((ins.op == Opcode::div || ins.op == Opcode::mod) && ops.concrete(b) == 0)
          return fault("division by zero");
        s.stack.back() = ops.binary(ins.op, s.stack.back(), b, pc);
        break;
      }
      case Opcode::neg:
        if (!need(1)) return fault("stack underflow");
        s.stack.back() = ops.negate(s.stack.back(), pc);
        break;
      case Opcode::jmp:
        next = static_cast<std::size_t>(ins.operand);
        break;
      case Opcode::jz: case Opcode::jnz: case Opcode::jeq: case Opcode::jne:
      case Opcode::jlt: case Opcode::jle: case Opcode::jgt: case Opcode::jge: {
        Opcode cmp = ins.op;
        V lhs, rhs;
        if (ins.op == Opcode::jz || ins.op == Opcode::jnz) {
          if (!need(1)) return fault("stack underflow");
          lhs = pop();
          rhs = ops.constant(0);
          cmp = ins.op == Opcode::jz ? Opcode::jeq : Opcode::jne;
        } else {
          if (!need(2)) return fault("stack underflow");
          rhs = pop();
          lhs = pop();
        }
        bool taken = detail::compare(cmp, ops.concrete(lhs), ops.concrete(rhs));
        if constexpr (Ops::kSymbolic) {
          if (ops.is_symbolic(lhs) || ops.is_symbolic(rhs)) {
            s.pending.site = pc;
            s.pending.op = cmp;
            s.pending.lhs = std::move(lhs);
            s.pending.rhs = std::move(rhs);
            s.pending.target = static_cast<std::size_t>(ins.operand);
            s.pending.concrete_taken = taken;
            return Event::symbolic_branch;
          }
        }
        if (taken) next = static_cast<std::size_t>(ins.operand);
        break;
      }
      case Opcode::call:
        if (s.calls.size() >= kMaxCallDepth) return fault("call stack overflow");
        s.calls.push_back(pc + 1);
        next = static_cast<std::size_t>(ins.operand);
        break;
      case Opcode::ret:
        if (s.calls.empty()) return fault("return with empty call stack");
        next = s.calls.back();
        s.calls.pop_back();
        break;
      case Opcode::cost:
        if (!need(1)) return fault("stack underflow");
        ops.add_cost(s.user_cost, s.stack.back());
        s.stack.pop_back();
        break;
      case Opcode::alloc: {
        if (!need(1)) return fault("stack underflow");
        std::int64_t n = ops.amount(s.stack.back(), pc);
        s.stack.pop_back();
        if (n < 0) return fault("negative allocation");
        if (s.live_alloc > std::numeric_limits<std::int64_t>::max() - n)
          return fault("allocation counter overflow");
        s.live_alloc += n;
        s.peak_alloc = std::max(s.peak_alloc, s.live_alloc);
        break;
      }
      case Opcode::free: {
        if (!need(1)) return fault("stack underflow");
        std::int64_t n = ops.amount(s.stack.back(), pc);
        s.stack.pop_back();
        if (n < 0) return fault("negative free");
        s.live_alloc = std::max<std::int64_t>(0, s.live_alloc - n);
        break;
      }
      case Opcode::note:
        ++s.counters[static_cast<std::size_t>(ins.operand)];
        break;
      case Opcode::halt:
        return Event::halted;
      case Opcode::fail:
        return fault("explicit failure");
    }
    if (!detail::goto_pc(program, s, next)) return Event::faulted;
  }
}

/// Wrapping two's complement arithmetic shared by every value policy.
std::int64_t concrete_binary(Opcode op, std::int64_t a, std::int64_t b);

}  // namespace wcfuzz::vm
