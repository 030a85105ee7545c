#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::trie {

using Rational = boost::multiprecision::cpp_rational;

/// One symbolic branch outcome: the branch instruction's pc and whether the
/// jump was taken (1) or fell through (0).
struct Decision {
  std::size_t site = 0;
  int choice = 0;

  friend auto operator<=>(const Decision&, const Decision&) = default;
};

enum class Heuristic : std::uint8_t { higher, lower };

std::string_view to_string(Heuristic h);
std::optional<Heuristic> parse_heuristic(std::string_view text);

struct TrieNode {
  std::size_t id = 0;
  TrieNode* parent = nullptr;
  std::size_t depth = 0;
  /// nullopt for the root.
  std::optional<Decision> decision;
  /// nullopt while unassessed.
  std::optional<Rational> score;
  /// Cost of the execution whose last symbolic decision is this node.
  std::optional<Rational> leaf_cost;
  /// Site of the decisions made by this node's children.
  std::optional<std::size_t> next_site;
  std::map<Decision, TrieNode*> children;
  /// Some assessed input whose path passes through this node.
  std::optional<vm::Bytes> witness;
  /// Exploration placeholder whose condition turned out unsatisfiable.
  bool infeasible = false;

  bool is_root() const { return !decision.has_value(); }
  bool is_leaf() const { return leaf_cost.has_value(); }
  /// Choices at next_site not yet present among the children. Empty when
  /// no child decision has been observed.
  std::set<int> unexplored_choices() const;
};

struct InsertOutcome {
  TrieNode* leaf = nullptr;
  std::size_t new_nodes = 0;
  /// Some (site, choice) on the path had never been seen in the trie.
  bool new_coverage = false;
};

class Trie {
 public:
  Trie();
  Trie(const Trie&) = delete;
  Trie& operator=(const Trie&) = delete;

  TrieNode& root() { return *nodes_.front(); }
  const TrieNode& root() const { return *nodes_.front(); }
  std::size_t node_count() const { return nodes_.size(); }
  const TrieNode& node(std::size_t id) const { return *nodes_.at(id); }
  TrieNode& node(std::size_t id) { return *nodes_.at(id); }

  /// Extends the trie with an assessed path. An empty path makes the root
  /// the leaf. A repeated complete path keeps the larger cost.
  InsertOutcome insert_path(std::span<const Decision> decisions, std::uint64_t leaf_cost,
                            const vm::Bytes* witness = nullptr);

  /// Adds an unscored child for a decision found by exploration; returns the
  /// existing child when there is one.
  TrieNode& add_placeholder(TrieNode& parent, Decision decision);

  bool covered(Decision d) const { return coverage_.count(d) != 0; }
  std::size_t coverage_size() const { return coverage_.size(); }

  /// Candidates are nodes with unexplored choices. Ordered by: yields new
  /// (site, choice) coverage, then score (unknown first), then depth per the
  /// heuristic, then lower id.
  const TrieNode* select_most_promising(Heuristic heuristic) const;

  std::vector<Decision> path_to(const TrieNode& node) const;

  /// Indented text tree, one node per line. `site_label` maps a site to the
  /// text shown after "site=" (defaults to the pc).
  std::string dump(const std::function<std::string(std::size_t)>& site_label = {}) const;
  std::string to_dot(const std::function<std::string(std::size_t)>& site_label = {}) const;

 private:
  TrieNode& create(TrieNode* parent, std::optional<Decision> decision);
  void rescore_upwards(TrieNode* node);

  std::vector<std::unique_ptr<TrieNode>> nodes_;
  std::set<Decision> coverage_;
};

std::string format_score(const std::optional<Rational>& score);

/// Process-wide count of trie mutations and selections, for isolation checks.
std::uint64_t operation_count();

}  // namespace wcfuzz::trie
