#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wcfuzz/solver/linear.hpp"
#include "wcfuzz/solver/solver.hpp"
#include "wcfuzz/trie/trie.hpp"
#include "wcfuzz/vm/execution.hpp"
#include "wcfuzz/vm/machine.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::concolic {

/// A concrete word shadowed by a linear expression over the input symbols
/// s_i (one per decoded layout value). `expr` is null for concrete values.
struct SymValue {
  std::int64_t concrete = 0;
  std::shared_ptr<const solver::LinearExpr> expr;

  bool symbolic() const { return expr != nullptr; }
  solver::LinearExpr linear() const {
    return expr ? *expr : solver::LinearExpr::of_constant(concrete);
  }
};

struct Concretization {
  std::size_t pc = 0;
  std::string reason;
};

struct PathCondition {
  /// Branch constraints plus equalities pinning concretized indices.
  std::vector<solver::Constraint> conjuncts;
  std::vector<trie::Decision> decisions;
  /// For each decision, the index of its conjunct.
  std::vector<std::size_t> decision_conjunct;
  /// Domains of auxiliary quotient variables, numbered from the input count.
  std::vector<vm::Interval> aux_domains;
};

/// Input domains followed by the path's auxiliary domains.
solver::Domains path_domains(const vm::InputLayout& layout, const PathCondition& path);

/// The model's input variables only.
solver::Assignment input_part(const solver::Assignment& model, std::size_t input_count);

/// Value policy for vm::run that builds linear expressions and falls back to
/// the concrete value for anything nonlinear or overflowing. Division and
/// remainder of a non-negative value by a positive constant stay linear
/// through a fresh quotient variable q: a = c*q + r with 0 <= r < c.
class SymbolicOps {
 public:
  SymbolicOps() = default;
  explicit SymbolicOps(solver::Domains input_domains) : domains(std::move(input_domains)), inputs(domains.size()) {}

  using Value = SymValue;
  static constexpr bool kSymbolic = true;

  SymValue constant(std::int64_t c) const { return {c, nullptr}; }
  std::int64_t concrete(const SymValue& v) const { return v.concrete; }
  bool is_symbolic(const SymValue& v) const { return v.symbolic(); }
  SymValue binary(vm::Opcode op, const SymValue& a, const SymValue& b, std::size_t pc);
  SymValue negate(const SymValue& a, std::size_t pc);
  std::int64_t index(const SymValue& v, std::size_t pc);
  std::int64_t amount(const SymValue& v, std::size_t pc);
  void add_cost(SymValue& acc, const SymValue& amount);

  /// Equalities for concretized indices and quotient bounds, drained by the
  /// owning machine.
  std::vector<solver::Constraint> pinned;
  std::vector<Concretization> log;
  /// Input domains followed by quotient domains.
  solver::Domains domains;
  std::size_t inputs = 0;

 private:
  std::optional<SymValue> divide(vm::Opcode op, const SymValue& a, std::int64_t c);
};

/// Symbolic machine over one program. Copyable, so exploration can fork it.
class ConcolicMachine {
 public:
  ConcolicMachine(const vm::Program& program, std::span<const std::int64_t> values,
                  vm::Bitmap* bitmap = nullptr);

  /// Runs until halt, fault, timeout (absolute step budget) or a symbolic
  /// branch.
  vm::Event run(std::uint64_t budget);

  const vm::PendingBranch<SymValue>& pending() const { return state_.pending; }

  /// Constraint for resolving the pending branch as `taken`; nullopt when
  /// the difference of its operands cannot be represented.
  std::optional<solver::Constraint> branch_constraint(bool taken) const;

  /// Whether resolving the pending branch records a decision. Branches whose
  /// operands cancel out or overflow are followed without one.
  bool pending_is_decision() const;

  /// Resolves the pending branch, recording the decision and its conjunct
  /// when the constraint is representable. Returns false on a VM fault.
  bool decide(bool taken);

  void detach_bitmap() { state_.bitmap = nullptr; }

  const PathCondition& path() const { return path_; }
  const vm::MachineState<SymValue>& state() const { return state_; }
  const std::vector<Concretization>& concretizations() const { return ops_.log; }
  std::uint64_t cost(vm::CostModel model) const;
  /// Running user-defined cost as a linear expression (unfloored).
  solver::LinearExpr symbolic_cost() const { return state_.user_cost.linear(); }

 private:
  void drain_pinned();

  const vm::Program* program_;
  vm::MachineState<SymValue> state_;
  SymbolicOps ops_;
  PathCondition path_;
};

struct ConcolicResult {
  PathCondition path;
  std::uint64_t cost = 0;
  vm::Status status = vm::Status::ok;
  /// Present under the user-defined model.
  std::optional<solver::LinearExpr> symbolic_cost;
  vm::ExecutionResult execution;
  std::vector<Concretization> concretizations;
};

/// Runs `input` concretely while collecting the symbolic branch constraints
/// it satisfies. Never solves anything.
ConcolicResult concolic_execute(const vm::Program& program, std::span<const std::uint8_t> input,
                                vm::CostModel cost_model, std::uint64_t budget = vm::kDefaultBudget);

}  // namespace wcfuzz::concolic
