#include "wcfuzz/explorer/explorer.hpp"

namespace wcfuzz::explorer {

namespace {

// Runs to the next recorded decision, following input-independent symbolic
// branches concretely.
vm::Event advance(concolic::ConcolicMachine& m, std::uint64_t budget) {
  for (;;) {
    vm::Event event = m.run(budget);
    if (event != vm::Event::symbolic_branch || m.pending_is_decision()) return event;
    if (!m.decide(m.pending().concrete_taken)) return vm::Event::faulted;
  }
}

void explore(concolic::ConcolicMachine& m, std::size_t made, const SymbolicState& root, std::size_t depth_bound,
             std::vector<concolic::PathCondition>& out) {
  vm::Event event = advance(m, root.budget);
  if (event != vm::Event::symbolic_branch) {
    if (made > 0) out.push_back(m.path());
    return;
  }
  for (int choice : {0, 1}) {
    trie::Decision d{m.pending().site, choice};
    if (made == 0 && root.known_children.count(d) != 0) continue;
    concolic::ConcolicMachine fork = m;
    bool alive = fork.decide(choice == 1);
    if (!alive || made + 1 == depth_bound) {
      out.push_back(fork.path());
      continue;
    }
    explore(fork, made + 1, root, depth_bound, out);
  }
}

}  // namespace

ExplorationTask make_task(const trie::Trie& trie, const trie::TrieNode& target, std::size_t depth_bound) {
  if (depth_bound == 0) throw std::invalid_argument("depth bound must be at least 1");
  if (!target.witness) throw std::invalid_argument("node " + std::to_string(target.id) + " has no witness input");
  ExplorationTask task;
  task.target = &target;
  task.prefix = trie.path_to(target);
  task.depth_bound = depth_bound;
  task.witness = *target.witness;
  for (const auto& [d, child] : target.children) task.known_children.insert(d);
  return task;
}

SymbolicState replay_to_node(const vm::Program& program, const ExplorationTask& task, std::uint64_t budget) {
  if (task.witness.size() < program.input_layout.byte_length())
    throw Divergence("witness input is shorter than the layout");
  auto values = program.input_layout.decode(task.witness);
  SymbolicState state{concolic::ConcolicMachine(program, values), task.depth_bound, task.known_children, budget};
  auto& m = state.machine;
  for (std::size_t i = 0; i < task.prefix.size(); ++i) {
    const auto& want = task.prefix[i];
    vm::Event event = advance(m, budget);
    if (event != vm::Event::symbolic_branch)
      throw Divergence("run ended after " + std::to_string(i) + " of " + std::to_string(task.prefix.size()) +
                       " decisions");
    const auto& p = m.pending();
    int got = p.concrete_taken ? 1 : 0;
    if (p.site != want.site || got != want.choice)
      throw Divergence("decision " + std::to_string(i) + " is (" + std::to_string(p.site) + ", " +
                       std::to_string(got) + "), trie expects (" + std::to_string(want.site) + ", " +
                       std::to_string(want.choice) + ")");
    if (!m.decide(p.concrete_taken)) throw Divergence("fault while following the trie path");
  }
  return state;
}

std::vector<concolic::PathCondition> bounded_explore(const SymbolicState& state, std::size_t depth_bound) {
  if (depth_bound == 0) throw std::invalid_argument("depth bound must be at least 1");
  std::vector<concolic::PathCondition> out;
  concolic::ConcolicMachine m = state.machine;
  explore(m, 0, state, depth_bound, out);
  return out;
}

std::vector<concolic::PathCondition> bounded_explore(const SymbolicState& state) {
  return bounded_explore(state, state.depth_bound);
}

}  // namespace wcfuzz::explorer
