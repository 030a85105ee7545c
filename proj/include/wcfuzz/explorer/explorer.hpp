#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <vector>

#include "wcfuzz/concolic/concolic.hpp"
#include "wcfuzz/trie/trie.hpp"
#include "wcfuzz/vm/execution.hpp"

namespace wcfuzz::explorer {

struct ExplorationTask {
  const trie::TrieNode* target = nullptr;
  /// Root-to-target decisions.
  std::vector<trie::Decision> prefix;
  std::size_t depth_bound = 1;
  /// Input known to follow `prefix`.
  vm::Bytes witness;
  /// The target's existing children, skipped at the first new decision.
  std::set<trie::Decision> known_children;
};

/// Throws std::invalid_argument if the target has no witness input or
/// depth_bound is zero.
ExplorationTask make_task(const trie::Trie& trie, const trie::TrieNode& target, std::size_t depth_bound);

/// Raised when the program no longer follows the trie path.
class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SymbolicState {
  concolic::ConcolicMachine machine;
  std::size_t depth_bound = 1;
  std::set<trie::Decision> known_children;
  std::uint64_t budget = vm::kDefaultBudget;
};

/// Symbolic replay of the witness along the task's prefix, leaving the
/// machine just after the target's decision. Solves nothing.
SymbolicState replay_to_node(const vm::Program& program, const ExplorationTask& task,
                             std::uint64_t budget = vm::kDefaultBudget);

/// Bounded symbolic execution from `state`: forks on both outcomes of every
/// symbolic branch until `depth_bound` new decisions are made or the run
/// ends, and returns the path condition of each frontier path that made at
/// least one new decision. Children already in the trie are skipped at the
/// first step only. Solves nothing.
std::vector<concolic::PathCondition> bounded_explore(const SymbolicState& state, std::size_t depth_bound);
std::vector<concolic::PathCondition> bounded_explore(const SymbolicState& state);

}  // namespace wcfuzz::explorer
