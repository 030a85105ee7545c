#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wcfuzz::solver {

using Var = std::uint32_t;

struct Term {
  Var var = 0;
  std::int64_t coef = 0;

  friend bool operator==(const Term&, const Term&) = default;
};

/// sum(coef * s_var) + constant. Terms are sorted by variable and never
/// carry a zero coefficient.
struct LinearExpr {
  std::vector<Term> terms;
  std::int64_t constant = 0;

  static LinearExpr variable(Var v) { return {{{v, 1}}, 0}; }
  static LinearExpr of_constant(std::int64_t c) { return {{}, c}; }

  bool is_constant() const { return terms.empty(); }
  std::int64_t coefficient(Var v) const;

  friend bool operator==(const LinearExpr&, const LinearExpr&) = default;
};

/// Each returns nullopt when a coefficient or the constant would overflow.
std::optional<LinearExpr> add(const LinearExpr& a, const LinearExpr& b);
std::optional<LinearExpr> subtract(const LinearExpr& a, const LinearExpr& b);
std::optional<LinearExpr> scale(const LinearExpr& a, std::int64_t k);

using Assignment = std::map<Var, std::int64_t>;

/// Value under `values`; variables missing from the assignment throw.
__int128 evaluate(const LinearExpr& e, const Assignment& values);
__int128 evaluate(const LinearExpr& e, std::span<const std::int64_t> values);

enum class Relation : std::uint8_t { lt, le, eq, ne, gt, ge };

Relation negate(Relation r);
std::string_view symbol(Relation r);
bool holds(Relation r, __int128 value);

/// `lhs REL 0`.
struct Constraint {
  LinearExpr lhs;
  Relation rel = Relation::eq;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

bool satisfied(const Constraint& c, const Assignment& values);
bool satisfied(const Constraint& c, std::span<const std::int64_t> values);
bool satisfied(std::span<const Constraint> conjuncts, const Assignment& values);

/// Human-readable form, e.g. "s0 - s1 <= 0".
std::string to_string(const LinearExpr& e);
std::string to_string(const Constraint& c);

}  // namespace wcfuzz::solver
