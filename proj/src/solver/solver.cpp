#include "wcfuzz/solver/solver.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <stdexcept>

namespace wcfuzz::solver {

namespace {

using i128 = __int128;

thread_local std::uint64_t g_thread_queries = 0;
std::atomic<std::uint64_t> g_total_queries{0};

void count_query() {
  ++g_thread_queries;
  g_total_queries.fetch_add(1, std::memory_order_relaxed);
}

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

i128 ceil_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) == (b < 0))) ++q;
  return q;
}

i128 abs128(i128 v) { return v < 0 ? -v : v; }

i128 gcd128(i128 a, i128 b) {
  a = abs128(a);
  b = abs128(b);
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

struct Row {
  std::vector<std::pair<std::size_t, i128>> terms;  // local index, coefficient
  i128 constant = 0;
};

// Sorts terms by variable, merges repeats and drops zero coefficients.
void canonical(Row& row) {
  std::sort(row.terms.begin(), row.terms.end());
  std::size_t out = 0;
  for (std::size_t k = 0; k < row.terms.size(); ++k) {
    if (out > 0 && row.terms[out - 1].first == row.terms[k].first)
      row.terms[out - 1].second += row.terms[k].second;
    else
      row.terms[out++] = row.terms[k];
    if (row.terms[out - 1].second == 0) --out;
  }
  row.terms.resize(out);
}

i128 row_gcd(const Row& row) {
  i128 g = 0;
  for (const auto& t : row.terms) g = gcd128(g, t.second);
  return g;
}

// x = sign * y + offset
struct Substitution {
  std::size_t x, y;
  i128 sign, offset;
};

class Search {
 public:
  Search(std::span<const Constraint> conjuncts, const LinearExpr* objective, const Domains& domains,
         const Options& options)
      : conjuncts_(conjuncts), objective_expr_(objective), options_(options) {
    auto local = [&](Var v) {
      auto [it, inserted] = index_.emplace(v, vars_.size());
      if (inserted) {
        if (v >= domains.size())
          throw std::invalid_argument("no domain for s" + std::to_string(v));
        vars_.push_back(v);
        lo_.push_back(domains[v].lo);
        hi_.push_back(domains[v].hi);
      }
      return it->second;
    };
    auto to_row = [&](const LinearExpr& e, i128 sign, i128 extra) {
      Row row;
      for (const auto& t : e.terms) row.terms.emplace_back(local(t.var), sign * t.coef);
      row.constant = sign * e.constant + extra;
      return row;
    };
    for (const auto& c : conjuncts) {
      switch (c.rel) {
        case Relation::le: le_.push_back(to_row(c.lhs, 1, 0)); break;
        case Relation::lt: le_.push_back(to_row(c.lhs, 1, 1)); break;
        case Relation::ge: le_.push_back(to_row(c.lhs, -1, 0)); break;
        case Relation::gt: le_.push_back(to_row(c.lhs, -1, 1)); break;
        case Relation::eq: eq_.push_back(to_row(c.lhs, 1, 0)); break;
        case Relation::ne: ne_.push_back(to_row(c.lhs, 1, 0)); break;
      }
    }
    if (objective != nullptr) objective_ = to_row(*objective, 1, 0);
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (lo_[i] > hi_[i]) unsat_ = true;
    eliminated_.assign(vars_.size(), false);
    if (!unsat_) presolve();
    if (!unsat_) finalize_rows();
  }

  Result run() {
    Result result;
    std::vector<i128> value(vars_.size(), 0);
    bool complete = !unsat_ && solve_components(value);
    result.nodes = nodes_;
    if (complete) {
      for (auto it = subs_.rbegin(); it != subs_.rend(); ++it) value[it->x] = it->sign * value[it->y] + it->offset;
      for (std::size_t i = 0; i < vars_.size(); ++i) result.model[vars_[i]] = static_cast<std::int64_t>(value[i]);
      if (!satisfied(conjuncts_, result.model))
        throw std::logic_error("solver model violates the query");
      if (objective_expr_) result.objective = evaluate(*objective_expr_, result.model);
    }
    if (aborted_) result.outcome = Outcome::indeterminate;
    else result.outcome = complete ? Outcome::sat : Outcome::unsat;
    if (result.outcome == Outcome::indeterminate && !objective_expr_) result.model.clear();
    return result;
  }

 private:
  // Eliminates variables through equalities with one term or with two unit
  // coefficients, intersecting domains along the way.
  void presolve() {
    bool progress = true;
    while (progress && !unsat_) {
      progress = false;
      for (std::size_t k = 0; k < eq_.size() && !unsat_;) {
        Row& row = eq_[k];
        canonical(row);
        std::optional<Substitution> sub;
        if (row.terms.empty()) {
          if (row.constant != 0) unsat_ = true;
        } else if (row.terms.size() == 1) {
          auto [x, a] = row.terms[0];
          if (row.constant % a != 0) {
            unsat_ = true;
          } else {
            i128 v = -row.constant / a;
            lo_[x] = std::max(lo_[x], v);
            hi_[x] = std::min(hi_[x], v);
            if (lo_[x] > hi_[x]) unsat_ = true;
          }
        } else if (row.terms.size() == 2 && abs128(row.terms[0].second) == 1 && abs128(row.terms[1].second) == 1) {
          auto [x, a] = row.terms[0];
          auto [y, b] = row.terms[1];
          // a*x + b*y + c = 0 with a = +-1 gives x = -a*b*y - a*c.
          sub = Substitution{x, y, -a * b, -a * row.constant};
        } else {
          ++k;
          continue;
        }
        eq_.erase(eq_.begin() + static_cast<std::ptrdiff_t>(k));
        progress = true;
        if (sub) {
          substitute(*sub);
          break;
        }
      }
    }
  }

  void substitute(const Substitution& s) {
    auto apply = [&](Row& row) {
      for (auto& [v, a] : row.terms)
        if (v == s.x) {
          row.constant += a * s.offset;
          v = s.y;
          a *= s.sign;
          canonical(row);
          return;
        }
    };
    for (auto* rows : {&le_, &eq_, &ne_})
      for (auto& row : *rows) apply(row);
    apply(objective_);
    i128 lo = s.sign > 0 ? lo_[s.x] - s.offset : s.offset - hi_[s.x];
    i128 hi = s.sign > 0 ? hi_[s.x] - s.offset : s.offset - lo_[s.x];
    lo_[s.y] = std::max(lo_[s.y], lo);
    hi_[s.y] = std::min(hi_[s.y], hi);
    if (lo_[s.y] > hi_[s.y]) unsat_ = true;
    eliminated_[s.x] = true;
    subs_.push_back(s);
  }

  void finalize_rows() {
    std::vector<Row> le = std::move(le_), ne = std::move(ne_);
    le_.clear();
    ne_.clear();
    for (auto& row : le) add_le(std::move(row));
    for (auto& row : eq_) add_eq(std::move(row));
    for (auto& row : ne) add_ne(std::move(row));
    eq_.clear();
    canonical(objective_);
  }

  void add_le(Row row) {
    canonical(row);
    if (row.terms.empty()) {
      if (row.constant > 0) unsat_ = true;
      return;
    }
    i128 g = row_gcd(row);
    if (g > 1) {
      for (auto& t : row.terms) t.second /= g;
      row.constant = ceil_div(row.constant, g);
    }
    le_.push_back(std::move(row));
  }

  void add_eq(Row row) {
    canonical(row);
    i128 g = row_gcd(row);
    if (row.terms.empty() ? row.constant != 0 : row.constant % g != 0) {
      unsat_ = true;
      return;
    }
    Row neg = row;
    for (auto& t : neg.terms) t.second = -t.second;
    neg.constant = -neg.constant;
    add_le(std::move(row));
    add_le(std::move(neg));
  }

  void add_ne(Row row) {
    canonical(row);
    if (row.terms.empty()) {
      if (row.constant == 0) unsat_ = true;
      return;
    }
    if (row.constant % row_gcd(row) != 0) return;
    ne_.push_back(std::move(row));
  }

  std::size_t find(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }

  // Solves each group of variables linked by constraints on its own; the
  // groups share nothing, so their solutions (and optima) combine.
  bool solve_components(std::vector<i128>& value) {
    const std::size_t n = vars_.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<bool> constrained(n, false);
    for (const auto* rows : {&le_, &ne_})
      for (const auto& row : *rows)
        for (const auto& [v, a] : row.terms) {
          constrained[v] = true;
          parent[find(parent, v)] = find(parent, row.terms.front().first);
        }

    std::vector<i128> objective_coef(n, 0);
    for (const auto& [v, a] : objective_.terms) objective_coef[v] = a;
    for (std::size_t i = 0; i < n; ++i) {
      if (eliminated_[i] || constrained[i]) continue;
      i128 hinted = lo_[i];
      if (options_.hint) {
        auto it = options_.hint->find(vars_[i]);
        if (it != options_.hint->end() && it->second >= lo_[i] && it->second <= hi_[i]) hinted = it->second;
      }
      value[i] = objective_coef[i] > 0 ? hi_[i] : objective_coef[i] < 0 ? lo_[i] : hinted;
    }

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i)
      if (!eliminated_[i] && constrained[i]) groups[find(parent, i)].push_back(i);
    std::vector<Row> all_le = std::move(le_), all_ne = std::move(ne_);
    Row full_objective = objective_;
    for (const auto& [root, members] : groups) {
      le_.clear();
      ne_.clear();
      for (const auto& row : all_le)
        if (find(parent, row.terms.front().first) == root) le_.push_back(row);
      for (const auto& row : all_ne)
        if (find(parent, row.terms.front().first) == root) ne_.push_back(row);
      objective_ = Row{};
      for (const auto& t : full_objective.terms)
        if (find(parent, t.first) == root) objective_.terms.push_back(t);
      has_objective_ = !objective_.terms.empty();
      group_ = members;
      found_ = false;
      bounded_ = false;
      std::vector<i128> lo(lo_.begin(), lo_.end()), hi(hi_.begin(), hi_.end());
      descend(lo, hi);
      // An aborted maximization still reports its best model so far.
      if (!found_) return false;
      for (std::size_t i : members) value[i] = best_[i];
    }
    return true;
  }

  // Returns false on conflict. Bounded number of sweeps; leaves are verified
  // exactly, so stopping early only costs pruning.
  bool propagate(std::vector<i128>& lo, std::vector<i128>& hi) const {
    for (int sweep = 0; sweep < 64; ++sweep) {
      bool changed = false;
      auto tighten_le = [&](const Row& row) {
        i128 min_sum = row.constant;
        for (const auto& [i, a] : row.terms) min_sum += a > 0 ? a * lo[i] : a * hi[i];
        if (min_sum > 0) return false;
        for (const auto& [i, a] : row.terms) {
          i128 own = a > 0 ? a * lo[i] : a * hi[i];
          i128 slack = own - min_sum;  // a*x <= slack
          if (a > 0) {
            i128 bound = floor_div(slack, a);
            if (bound < hi[i]) {
              hi[i] = bound;
              changed = true;
            }
          } else {
            i128 bound = ceil_div(slack, a);
            if (bound > lo[i]) {
              lo[i] = bound;
              changed = true;
            }
          }
          if (lo[i] > hi[i]) return false;
        }
        return true;
      };
      for (const auto& row : le_)
        if (!tighten_le(row)) return false;
      if (bounded_ && !tighten_le(bound_row_)) return false;
      for (const auto& row : ne_) {
        i128 rest = row.constant;
        std::size_t free_term = 0;
        std::size_t unfixed = 0;
        for (std::size_t k = 0; k < row.terms.size(); ++k) {
          const auto& [i, a] = row.terms[k];
          if (lo[i] == hi[i]) {
            rest += a * lo[i];
          } else {
            ++unfixed;
            free_term = k;
          }
        }
        if (unfixed == 0) {
          if (rest == 0) return false;
        } else if (unfixed == 1) {
          const auto& [i, a] = row.terms[free_term];
          if ((-rest) % a == 0) {
            i128 v = -rest / a;
            if (v == lo[i]) {
              ++lo[i];
              changed = true;
            } else if (v == hi[i]) {
              --hi[i];
              changed = true;
            }
            if (lo[i] > hi[i]) return false;
          }
        }
      }
      if (!changed) break;
    }
    return true;
  }

  bool verify(const std::vector<i128>& value) const {
    auto eval = [&](const Row& row) {
      i128 sum = row.constant;
      for (const auto& [i, a] : row.terms) sum += a * value[i];
      return sum;
    };
    for (const auto& row : le_)
      if (eval(row) > 0) return false;
    for (const auto& row : ne_)
      if (eval(row) == 0) return false;
    return !bounded_ || eval(bound_row_) <= 0;
  }

  // Returns true when the search should stop.
  bool descend(std::vector<i128>& lo, std::vector<i128>& hi) {
    if (++nodes_ > options_.node_limit ||
        (options_.deadline && nodes_ % 1024 == 0 && std::chrono::steady_clock::now() >= *options_.deadline)) {
      aborted_ = true;
      return true;
    }
    if (!propagate(lo, hi)) return false;

    std::size_t pick = vars_.size();
    i128 best_width = 0;
    for (std::size_t i : group_) {
      i128 width = hi[i] - lo[i];
      if (width > 0 && (pick == vars_.size() || width < best_width)) {
        pick = i;
        best_width = width;
      }
    }
    if (pick == vars_.size()) {
      if (!verify(lo)) return false;
      found_ = true;
      best_ = lo;
      if (!has_objective_) return true;
      i128 value = 0;
      for (const auto& [i, a] : objective_.terms) value += a * lo[i];
      // Require strict improvement from here on: -obj + value + 1 <= 0.
      bound_row_.terms.clear();
      for (const auto& [i, a] : objective_.terms) bound_row_.terms.emplace_back(i, -a);
      bound_row_.constant = value + 1;
      bounded_ = true;
      return false;
    }

    i128 a = 0;
    if (has_objective_)
      for (const auto& [i, c] : objective_.terms)
        if (i == pick) a = c;
    bool upper_first = a > 0;

    struct Range {
      i128 lo, hi;
    };
    Range first{}, second{};
    std::vector<Range> ranges;
    const i128 l = lo[pick], h = hi[pick];
    std::optional<i128> hinted;
    if (options_.hint != nullptr) {
      auto it = options_.hint->find(vars_[pick]);
      if (it != options_.hint->end() && it->second >= l && it->second <= h) hinted = it->second;
    }
    if (hinted) {
      ranges.push_back({*hinted, *hinted});
      Range below{l, *hinted - 1}, above{*hinted + 1, h};
      first = upper_first ? above : below;
      second = upper_first ? below : above;
    } else {
      i128 mid = l + (h - l) / 2;
      Range below{l, mid}, above{mid + 1, h};
      first = upper_first ? above : below;
      second = upper_first ? below : above;
    }
    ranges.push_back(first);
    ranges.push_back(second);

    for (const auto& r : ranges) {
      if (r.lo > r.hi) continue;
      std::vector<i128> sub_lo = lo, sub_hi = hi;
      sub_lo[pick] = r.lo;
      sub_hi[pick] = r.hi;
      if (descend(sub_lo, sub_hi)) return true;
    }
    return false;
  }

  std::span<const Constraint> conjuncts_;
  const LinearExpr* objective_expr_;
  const Options& options_;
  std::map<Var, std::size_t> index_;
  std::vector<Var> vars_;
  std::vector<i128> lo_, hi_;
  std::vector<Row> le_, eq_, ne_;
  std::vector<bool> eliminated_;
  std::vector<Substitution> subs_;
  Row objective_;
  bool has_objective_ = false;
  Row bound_row_;
  bool bounded_ = false;
  bool unsat_ = false;
  std::vector<std::size_t> group_;

  std::uint64_t nodes_ = 0;
  bool aborted_ = false;
  bool found_ = false;
  std::vector<i128> best_;
};

std::string literal(i128 v) {
  if (v < 0) return "(- " + literal(-v) + ")";
  if (v == 0) return "0";
  std::string digits;
  while (v != 0) {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return digits;
}

std::string var_name(Var v) { return "s" + std::to_string(v); }

std::string sum(const std::vector<std::string>& parts) {
  if (parts.empty()) return "0";
  if (parts.size() == 1) return parts.front();
  std::string out = "(+";
  for (const auto& p : parts) out += " " + p;
  return out + ")";
}

std::string scaled(i128 coef, Var v) {
  if (coef == 1) return var_name(v);
  return "(* " + literal(coef) + " " + var_name(v) + ")";
}

std::string smt_constraint(const Constraint& c) {
  std::vector<std::string> left, right;
  for (const auto& t : c.lhs.terms) {
    if (t.coef > 0) left.push_back(scaled(t.coef, t.var));
    else right.push_back(scaled(-static_cast<i128>(t.coef), t.var));
  }
  if (c.lhs.constant != 0) right.push_back(literal(-static_cast<i128>(c.lhs.constant)));
  std::string l = sum(left), r = sum(right);
  switch (c.rel) {
    case Relation::lt: return "(< " + l + " " + r + ")";
    case Relation::le: return "(<= " + l + " " + r + ")";
    case Relation::eq: return "(= " + l + " " + r + ")";
    case Relation::ne: return "(not (= " + l + " " + r + "))";
    case Relation::gt: return "(> " + l + " " + r + ")";
    case Relation::ge: return "(>= " + l + " " + r + ")";
  }
  return "";
}

}  // namespace

Domains domains_of(const vm::InputLayout& layout) {
  Domains out;
  out.reserve(layout.value_count());
  for (std::size_t i = 0; i < layout.value_count(); ++i) out.push_back(layout.domain(i));
  return out;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::sat: return "sat";
    case Outcome::unsat: return "unsat";
    case Outcome::indeterminate: return "indeterminate";
  }
  return "?";
}

Result solve(std::span<const Constraint> conjuncts, const Domains& domains, Options options) {
  count_query();
  return Search(conjuncts, nullptr, domains, options).run();
}

Result maximize(std::span<const Constraint> conjuncts, const LinearExpr& objective,
                const Domains& domains, Options options) {
  count_query();
  return Search(conjuncts, &objective, domains, options).run();
}

std::string to_smtlib(std::span<const Constraint> conjuncts, const Domains& domains,
                      const std::optional<LinearExpr>& objective) {
  std::vector<Var> vars;
  auto note = [&](const LinearExpr& e) {
    for (const auto& t : e.terms) vars.push_back(t.var);
  };
  for (const auto& c : conjuncts) note(c.lhs);
  if (objective) note(*objective);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

  std::string out = "(set-logic QF_LIA)\n";
  for (Var v : vars) out += "(declare-const " + var_name(v) + " Int)\n";
  for (Var v : vars) {
    if (v >= domains.size()) throw std::invalid_argument("no domain for " + var_name(v));
    out += "(assert (and (<= " + literal(domains[v].lo) + " " + var_name(v) + ") (<= " +
           var_name(v) + " " + literal(domains[v].hi) + ")))\n";
  }
  for (const auto& c : conjuncts) out += "(assert " + smt_constraint(c) + ")\n";
  if (objective) {
    std::vector<std::string> parts;
    for (const auto& t : objective->terms) parts.push_back(scaled(t.coef, t.var));
    if (objective->constant != 0 || parts.empty()) parts.push_back(literal(objective->constant));
    out += "(maximize " + sum(parts) + ")\n";
  }
  out += "(check-sat)\n(get-model)\n";
  return out;
}

std::uint64_t thread_query_count() { return g_thread_queries; }

std::uint64_t total_query_count() { return g_total_queries.load(std::memory_order_relaxed); }

}  // namespace wcfuzz::solver
