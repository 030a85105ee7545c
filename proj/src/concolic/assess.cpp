#include "wcfuzz/concolic/assess.hpp"

#include <spdlog/spdlog.h>

#include "wcfuzz/coordinator/generate.hpp"

namespace wcfuzz::concolic {

std::string_view to_string(AssessMode mode) {
  return mode == AssessMode::import_mode ? "import" : "export";
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::seed: return "seed";
    case Origin::fuzzer: return "fuzzer";
    case Origin::exploration: return "exploration";
    case Origin::maximization: return "maximization";
  }
  return "?";
}

Assessor::Assessor(const vm::Program& program, vm::CostModel cost_model, trie::Trie& trie,
                   std::uint64_t budget)
    : program_(program),
      cost_model_(cost_model),
      trie_(trie),
      budget_(budget) {}

std::vector<vm::Bytes> Assessor::assess(std::span<const vm::Bytes> inputs, AssessMode mode, Origin origin) {
  std::vector<vm::Bytes> exported;
  for (const auto& input : inputs) assess_one(input, mode, origin, exported);
  return exported;
}

std::vector<vm::Bytes> Assessor::assess(const vm::Bytes& input, AssessMode mode, Origin origin) {
  return assess(std::span<const vm::Bytes>(&input, 1), mode, origin);
}

const AssessmentRecord& Assessor::assess_one(const vm::Bytes& input, AssessMode mode, Origin origin,
                                             std::vector<vm::Bytes>& exported) {
  auto run = concolic_execute(program_, input, cost_model_, budget_);

  AssessmentRecord rec;
  rec.elapsed_s = clock_ ? clock_() : 0.0;
  rec.mode = mode;
  rec.origin = origin;
  rec.input = input;
  rec.cost = run.cost;
  rec.status = run.status;
  rec.highscore_before = highscore_;
  rec.counters = run.execution.counters;

  if (run.status == vm::Status::error) {
    spdlog::debug("assess: skipping input that faults: {}", run.execution.fault);
    audit_.push_back(std::move(rec));
    return audit_.back();
  }

  auto inserted = trie_.insert_path(run.path.decisions, run.cost, &input);
  rec.new_coverage = inserted.new_coverage;
  bool new_high = run.cost > highscore_ || best_input_.empty();
  if (mode == AssessMode::export_mode && (rec.new_coverage || run.cost > highscore_)) {
    rec.exported = true;
    exported.push_back(input);
  }
  if (new_high) {
    highscore_ = std::max(highscore_, run.cost);
    best_input_ = input;
  }
  audit_.push_back(std::move(rec));
  std::size_t index = audit_.size() - 1;

  if (mode == AssessMode::import_mode && cost_model_ == vm::CostModel::user_defined &&
      run.symbolic_cost && !run.symbolic_cost->is_constant() && run.status == vm::Status::ok) {
    solver::Assignment hint;
    for (std::size_t i = 0; i < run.execution.decoded_input.size(); ++i)
      hint[static_cast<solver::Var>(i)] = run.execution.decoded_input[i];
    auto best = solver::maximize(run.path.conjuncts, *run.symbolic_cost,
                                 path_domains(program_.input_layout, run.path),
                                 {.hint = &hint, .deadline = deadline_ ? std::optional(deadline_()) : std::nullopt});
    __int128 current = solver::evaluate(*run.symbolic_cost, run.execution.decoded_input);
    if (best.outcome == solver::Outcome::sat && best.objective && *best.objective > current) {
      auto improved = coordinator::generate_input_file(
          input_part(best.model, program_.input_layout.value_count()), program_.input_layout, input);
      if (improved != input) assess_one(improved, AssessMode::export_mode, Origin::maximization, exported);
    }
  }
  return audit_[index];
}

}  // namespace wcfuzz::concolic
