#include "wcfuzz/trie/trie.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <sstream>

namespace wcfuzz::trie {

namespace {

std::atomic<std::uint64_t> g_operations{0};

void count_operation() { g_operations.fetch_add(1, std::memory_order_relaxed); }

std::string default_label(std::size_t site) { return std::to_string(site); }

}  // namespace

std::string_view to_string(Heuristic h) { return h == Heuristic::higher ? "higher" : "lower"; }

std::optional<Heuristic> parse_heuristic(std::string_view text) {
  if (text == "higher") return Heuristic::higher;
  if (text == "lower") return Heuristic::lower;
  return std::nullopt;
}

std::set<int> TrieNode::unexplored_choices() const {
  std::set<int> out;
  if (!next_site) return out;
  for (int choice : {0, 1})
    if (children.count({*next_site, choice}) == 0) out.insert(choice);
  return out;
}

std::string format_score(const std::optional<Rational>& score) {
  if (!score) return "?";
  const auto& num = boost::multiprecision::numerator(*score);
  const auto& den = boost::multiprecision::denominator(*score);
  if (den == 1) return num.str();
  // Exact decimal when the denominator only has factors 2 and 5.
  boost::multiprecision::cpp_int d = den;
  int twos = 0, fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d == 1) {
    int digits = std::max(twos, fives);
    boost::multiprecision::cpp_int scale = 1;
    for (int k = 0; k < digits; ++k) scale *= 10;
    boost::multiprecision::cpp_int scaled = num * scale / den;
    bool negative = scaled < 0;
    if (negative) scaled = -scaled;
    std::string s = scaled.str();
    if (s.size() <= static_cast<std::size_t>(digits)) s.insert(0, static_cast<std::size_t>(digits) + 1 - s.size(), '0');
    s.insert(s.size() - static_cast<std::size_t>(digits), ".");
    return negative ? "-" + s : s;
  }
  return num.str() + "/" + den.str();
}

std::uint64_t operation_count() { return g_operations.load(std::memory_order_relaxed); }

Trie::Trie() { create(nullptr, std::nullopt); }

TrieNode& Trie::create(TrieNode* parent, std::optional<Decision> decision) {
  auto node = std::make_unique<TrieNode>();
  node->id = nodes_.size();
  node->parent = parent;
  node->depth = parent == nullptr ? 0 : parent->depth + 1;
  node->decision = decision;
  TrieNode& ref = *node;
  nodes_.push_back(std::move(node));
  if (parent != nullptr) {
    parent->children.emplace(*decision, &ref);
    if (!parent->next_site) parent->next_site = decision->site;
  }
  return ref;
}

void Trie::rescore_upwards(TrieNode* node) {
  for (; node != nullptr; node = node->parent) {
    Rational sum = 0;
    std::size_t known = 0;
    for (const auto& [d, child] : node->children) {
      if (!child->score) continue;
      sum += *child->score;
      ++known;
    }
    if (node->leaf_cost) {
      sum += *node->leaf_cost;
      ++known;
    }
    if (known == 0) node->score.reset();
    else node->score = sum / known;
  }
}

InsertOutcome Trie::insert_path(std::span<const Decision> decisions, std::uint64_t leaf_cost,
                                const vm::Bytes* witness) {
  count_operation();
  InsertOutcome out;
  TrieNode* node = &root();
  if (witness != nullptr && !node->witness) node->witness = *witness;
  for (const auto& d : decisions) {
    if (coverage_.insert(d).second) out.new_coverage = true;
    auto it = node->children.find(d);
    if (it == node->children.end()) {
      node = &create(node, d);
      ++out.new_nodes;
    } else {
      node = it->second;
    }
    if (witness != nullptr && !node->witness) node->witness = *witness;
  }
  Rational cost = leaf_cost;
  if (node->leaf_cost && *node->leaf_cost != cost) {
    spdlog::debug("trie: path to node {} re-assessed with cost {} (was {}); keeping the maximum", node->id,
                 leaf_cost, format_score(node->leaf_cost));
    if (cost < *node->leaf_cost) cost = *node->leaf_cost;
  }
  node->leaf_cost = cost;
  node->infeasible = false;
  rescore_upwards(node);
  out.leaf = node;
  return out;
}

TrieNode& Trie::add_placeholder(TrieNode& parent, Decision decision) {
  count_operation();
  auto it = parent.children.find(decision);
  if (it != parent.children.end()) return *it->second;
  return create(&parent, decision);
}

const TrieNode* Trie::select_most_promising(Heuristic heuristic) const {
  count_operation();
  const TrieNode* best = nullptr;
  bool best_new = false;
  auto yields_new = [&](const TrieNode& n) {
    for (int choice : n.unexplored_choices())
      if (!covered({*n.next_site, choice})) return true;
    return false;
  };
  // True when a ranks before b; ids break ties because nodes are visited
  // in id order and only strictly better candidates replace the incumbent.
  auto better = [&](const TrieNode& a, bool a_new, const TrieNode& b, bool b_new) {
    if (a_new != b_new) return a_new;
    if (a.score != b.score) {
      if (!a.score) return true;
      if (!b.score) return false;
      return *a.score > *b.score;
    }
    if (a.depth != b.depth)
      return heuristic == Heuristic::lower ? a.depth > b.depth : a.depth < b.depth;
    return false;
  };
  for (const auto& n : nodes_) {
    if (n->unexplored_choices().empty()) continue;
    bool n_new = yields_new(*n);
    if (best == nullptr || better(*n, n_new, *best, best_new)) {
      best = n.get();
      best_new = n_new;
    }
  }
  return best;
}

std::vector<Decision> Trie::path_to(const TrieNode& node) const {
  std::vector<Decision> path(node.depth);
  for (const TrieNode* n = &node; !n->is_root(); n = n->parent) path[n->depth - 1] = *n->decision;
  return path;
}

std::string Trie::dump(const std::function<std::string(std::size_t)>& site_label) const {
  auto label = site_label ? site_label : default_label;
  std::ostringstream out;
  auto visit = [&](auto& self, const TrieNode& n) -> void {
    out << std::string(2 * n.depth, ' ') << "id=" << n.id;
    if (n.is_root()) out << " ROOT";
    else out << " site=" << label(n.decision->site) << " choice=" << n.decision->choice;
    out << " score=" << format_score(n.score);
    if (n.is_leaf()) out << " leaf";
    if (n.infeasible) out << " infeasible";
    out << '\n';
    for (const auto& [d, child] : n.children) self(self, *child);
  };
  visit(visit, root());
  return out.str();
}

std::string Trie::to_dot(const std::function<std::string(std::size_t)>& site_label) const {
  auto label = site_label ? site_label : default_label;
  std::ostringstream out;
  out << "digraph trie {\n  node [shape=box, fontname=monospace];\n";
  for (const auto& n : nodes_) {
    out << "  n" << n->id << " [label=\"id=" << n->id;
    if (n->is_root()) out << "\\nROOT";
    else out << "\\nsite=" << label(n->decision->site) << "\\nchoice=" << n->decision->choice;
    out << "\\nscore=" << format_score(n->score) << "\"";
    if (!n->score) out << ", style=dashed";
    out << "];\n";
    if (n->parent != nullptr) out << "  n" << n->parent->id << " -> n" << n->id << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace wcfuzz::trie
