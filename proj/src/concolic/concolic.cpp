#include "wcfuzz/concolic/concolic.hpp"

#include <limits>
#include <stdexcept>

namespace wcfuzz::concolic {

namespace {

using solver::LinearExpr;
using solver::Relation;

SymValue make(std::int64_t concrete, std::optional<LinearExpr> expr) {
  if (!expr || expr->is_constant()) return {concrete, nullptr};
  return {concrete, std::make_shared<const LinearExpr>(std::move(*expr))};
}

Relation relation_of(vm::Opcode op) {
  switch (op) {
    case vm::Opcode::jeq: return Relation::eq;
    case vm::Opcode::jne: return Relation::ne;
    case vm::Opcode::jlt: return Relation::lt;
    case vm::Opcode::jle: return Relation::le;
    case vm::Opcode::jgt: return Relation::gt;
    default: return Relation::ge;
  }
}

bool fits(__int128 v) {
  return v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max();
}

}  // namespace

SymValue SymbolicOps::binary(vm::Opcode op, const SymValue& a, const SymValue& b, std::size_t pc) {
  std::int64_t result = vm::concrete_binary(op, a.concrete, b.concrete);
  if (!a.symbolic() && !b.symbolic()) return {result, nullptr};

  auto concretize = [&](const char* why) {
    log.push_back({pc, std::string(vm::opcode_name(op)) + ": " + why});
    return SymValue{result, nullptr};
  };
  __int128 exact = 0;
  std::optional<LinearExpr> expr;
  switch (op) {
    case vm::Opcode::add:
      exact = static_cast<__int128>(a.concrete) + b.concrete;
      expr = solver::add(a.linear(), b.linear());
      break;
    case vm::Opcode::sub:
      exact = static_cast<__int128>(a.concrete) - b.concrete;
      expr = solver::subtract(a.linear(), b.linear());
      break;
    case vm::Opcode::mul:
      if (a.symbolic() && b.symbolic()) return concretize("product of two symbolic values");
      exact = static_cast<__int128>(a.concrete) * b.concrete;
      expr = a.symbolic() ? solver::scale(*a.expr, b.concrete) : solver::scale(*b.expr, a.concrete);
      break;
    case vm::Opcode::div:
    case vm::Opcode::mod:
      if (!b.symbolic() && b.concrete > 0 && a.concrete >= 0)
        if (auto v = divide(op, a, b.concrete)) return *v;
      return concretize("nonlinear operation");
    default:
      return concretize("nonlinear operation");
  }
  if (!fits(exact) || !expr) return concretize("overflow");
  return make(result, std::move(expr));
}

std::optional<SymValue> SymbolicOps::divide(vm::Opcode op, const SymValue& a, std::int64_t c) {
  if (domains.empty()) return std::nullopt;
  // Bounds of a over the current domains give the quotient's domain.
  __int128 lo = a.expr->constant, hi = a.expr->constant;
  for (const auto& t : a.expr->terms) {
    __int128 x = static_cast<__int128>(t.coef) * domains[t.var].lo;
    __int128 y = static_cast<__int128>(t.coef) * domains[t.var].hi;
    lo += std::min(x, y);
    hi += std::max(x, y);
  }
  lo = std::max<__int128>(lo, 0);
  if (hi < lo || !fits(hi)) return std::nullopt;
  const std::int64_t q_concrete = a.concrete / c;
  auto q = static_cast<solver::Var>(domains.size());
  auto r = solver::subtract(*a.expr, *solver::scale(LinearExpr::variable(q), c));
  if (!r) return std::nullopt;
  domains.push_back({static_cast<std::int64_t>(lo / c), static_cast<std::int64_t>(hi / c)});
  pinned.push_back({*r, Relation::ge});
  pinned.push_back({*solver::subtract(*r, LinearExpr::of_constant(c - 1)), Relation::le});
  if (op == vm::Opcode::div) return make(q_concrete, LinearExpr::variable(q));
  return make(a.concrete % c, std::move(r));
}

SymValue SymbolicOps::negate(const SymValue& a, std::size_t pc) {
  std::int64_t result = static_cast<std::int64_t>(0 - static_cast<std::uint64_t>(a.concrete));
  if (!a.symbolic()) return {result, nullptr};
  auto expr = solver::scale(*a.expr, -1);
  if (!expr || a.concrete == std::numeric_limits<std::int64_t>::min()) {
    log.push_back({pc, "neg: overflow"});
    return {result, nullptr};
  }
  return make(result, std::move(expr));
}

std::int64_t SymbolicOps::index(const SymValue& v, std::size_t pc) {
  if (v.symbolic()) {
    LinearExpr e = *v.expr;
    auto pinned_expr = solver::subtract(e, LinearExpr::of_constant(v.concrete));
    if (pinned_expr) pinned.push_back({*pinned_expr, Relation::eq});
    log.push_back({pc, "symbolic index pinned to " + std::to_string(v.concrete)});
  }
  return v.concrete;
}

std::int64_t SymbolicOps::amount(const SymValue& v, std::size_t pc) {
  if (v.symbolic()) log.push_back({pc, "symbolic allocation size concretized"});
  return v.concrete;
}

void SymbolicOps::add_cost(SymValue& acc, const SymValue& amount) {
  std::int64_t result = static_cast<std::int64_t>(static_cast<std::uint64_t>(acc.concrete) +
                                                   static_cast<std::uint64_t>(amount.concrete));
  if (!acc.symbolic() && !amount.symbolic()) {
    acc = {result, nullptr};
    return;
  }
  auto expr = solver::add(acc.linear(), amount.linear());
  if (!expr || !fits(static_cast<__int128>(acc.concrete) + amount.concrete)) {
    log.push_back({0, "cost: overflow"});
    acc = {result, nullptr};
    return;
  }
  acc = make(result, std::move(expr));
}

ConcolicMachine::ConcolicMachine(const vm::Program& program, std::span<const std::int64_t> values,
                                 vm::Bitmap* bitmap)
    : program_(&program), ops_(solver::domains_of(program.input_layout)) {
  state_.inputs.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    state_.inputs.push_back(make(values[i], LinearExpr::variable(static_cast<solver::Var>(i))));
  state_.bitmap = bitmap;
  vm::reset_state<SymValue>(program, state_, SymValue{});
}

vm::Event ConcolicMachine::run(std::uint64_t budget) {
  vm::Event event = vm::run(*program_, state_, ops_, budget);
  drain_pinned();
  return event;
}

void ConcolicMachine::drain_pinned() {
  for (auto& c : ops_.pinned) path_.conjuncts.push_back(std::move(c));
  ops_.pinned.clear();
  path_.aux_domains.assign(ops_.domains.begin() + static_cast<std::ptrdiff_t>(ops_.inputs), ops_.domains.end());
}

solver::Domains path_domains(const vm::InputLayout& layout, const PathCondition& path) {
  auto domains = solver::domains_of(layout);
  domains.insert(domains.end(), path.aux_domains.begin(), path.aux_domains.end());
  return domains;
}

solver::Assignment input_part(const solver::Assignment& model, std::size_t input_count) {
  solver::Assignment out;
  for (const auto& [var, value] : model)
    if (var < input_count) out.emplace(var, value);
  return out;
}

std::optional<solver::Constraint> ConcolicMachine::branch_constraint(bool taken) const {
  const auto& p = state_.pending;
  auto diff = solver::subtract(p.lhs.linear(), p.rhs.linear());
  if (!diff) return std::nullopt;
  Relation rel = relation_of(p.op);
  return solver::Constraint{std::move(*diff), taken ? rel : solver::negate(rel)};
}

bool ConcolicMachine::pending_is_decision() const {
  auto c = branch_constraint(true);
  return c && !c->lhs.is_constant();
}

bool ConcolicMachine::decide(bool taken) {
  auto c = branch_constraint(taken);
  if (c && c->lhs.is_constant()) {
    // Operands cancel out, so the outcome does not depend on the input.
  } else if (c) {
    path_.decision_conjunct.push_back(path_.conjuncts.size());
    path_.conjuncts.push_back(std::move(*c));
    path_.decisions.push_back({state_.pending.site, taken ? 1 : 0});
  } else {
    ops_.log.push_back({state_.pending.site, "branch operands overflow; decision not recorded"});
  }
  return vm::take_branch(*program_, state_, taken);
}

std::uint64_t ConcolicMachine::cost(vm::CostModel model) const {
  return vm::select_cost(model, state_.jumps, state_.peak_alloc, state_.user_cost.concrete);
}

ConcolicResult concolic_execute(const vm::Program& program, std::span<const std::uint8_t> input,
                                vm::CostModel cost_model, std::uint64_t budget) {
  if (budget == 0) throw std::invalid_argument("instruction budget must be positive");
  ConcolicResult result;
  auto& exec = result.execution;
  exec.bitmap = std::make_unique<vm::Bitmap>();
  if (input.size() < program.input_layout.byte_length()) {
    result.status = exec.status = vm::Status::error;
    exec.fault = "input has " + std::to_string(input.size()) + " bytes, layout needs " +
                 std::to_string(program.input_layout.byte_length());
    exec.counters.assign(program.counters.size(), 0);
    return result;
  }
  exec.decoded_input = program.input_layout.decode(input);
  ConcolicMachine machine(program, exec.decoded_input, exec.bitmap.get());
  vm::Event event;
  for (;;) {
    event = machine.run(budget);
    if (event != vm::Event::symbolic_branch) break;
    if (!machine.decide(machine.pending().concrete_taken)) {
      event = vm::Event::faulted;
      break;
    }
  }
  const auto& s = machine.state();
  switch (event) {
    case vm::Event::halted: exec.status = vm::Status::ok; break;
    case vm::Event::timed_out: exec.status = vm::Status::timeout; break;
    default: exec.status = vm::Status::error; break;
  }
  exec.cost = machine.cost(cost_model);
  exec.counters = s.counters;
  exec.instructions = s.steps;
  exec.jumps = s.jumps;
  exec.fault = s.fault;
  result.path = machine.path();
  result.cost = exec.cost;
  result.status = exec.status;
  if (cost_model == vm::CostModel::user_defined) result.symbolic_cost = machine.symbolic_cost();
  result.concretizations = machine.concretizations();
  return result;
}

}  // namespace wcfuzz::concolic
