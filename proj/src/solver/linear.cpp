#include "wcfuzz/solver/linear.hpp"

#include <stdexcept>

namespace wcfuzz::solver {

std::int64_t LinearExpr::coefficient(Var v) const {
  for (const auto& t : terms)
    if (t.var == v) return t.coef;
  return 0;
}

namespace {

std::optional<LinearExpr> combine(const LinearExpr& a, const LinearExpr& b, bool minus) {
  LinearExpr out;
  if (minus ? __builtin_sub_overflow(a.constant, b.constant, &out.constant)
            : __builtin_add_overflow(a.constant, b.constant, &out.constant))
    return std::nullopt;
  out.terms.reserve(a.terms.size() + b.terms.size());
  std::size_t i = 0, j = 0;
  while (i < a.terms.size() || j < b.terms.size()) {
    if (j == b.terms.size() || (i < a.terms.size() && a.terms[i].var < b.terms[j].var)) {
      out.terms.push_back(a.terms[i++]);
      continue;
    }
    Term t = b.terms[j++];
    if (minus && __builtin_sub_overflow(std::int64_t{0}, t.coef, &t.coef)) return std::nullopt;
    if (i < a.terms.size() && a.terms[i].var == t.var) {
      if (__builtin_add_overflow(a.terms[i].coef, t.coef, &t.coef)) return std::nullopt;
      ++i;
    }
    if (t.coef != 0) out.terms.push_back(t);
  }
  return out;
}

std::string number(__int128 v) {
  if (v == 0) return "0";
  bool negative = v < 0;
  unsigned __int128 m = negative ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string digits;
  while (m != 0) {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(m % 10)));
    m /= 10;
  }
  return negative ? "-" + digits : digits;
}

}  // namespace

std::optional<LinearExpr> add(const LinearExpr& a, const LinearExpr& b) { return combine(a, b, false); }

std::optional<LinearExpr> subtract(const LinearExpr& a, const LinearExpr& b) { return combine(a, b, true); }

std::optional<LinearExpr> scale(const LinearExpr& a, std::int64_t k) {
  if (k == 0) return LinearExpr{};
  LinearExpr out;
  if (__builtin_mul_overflow(a.constant, k, &out.constant)) return std::nullopt;
  out.terms.reserve(a.terms.size());
  for (const auto& t : a.terms) {
    Term s{t.var, 0};
    if (__builtin_mul_overflow(t.coef, k, &s.coef)) return std::nullopt;
    out.terms.push_back(s);
  }
  return out;
}

__int128 evaluate(const LinearExpr& e, const Assignment& values) {
  __int128 sum = e.constant;
  for (const auto& t : e.terms) {
    auto it = values.find(t.var);
    if (it == values.end()) throw std::out_of_range("no value for s" + std::to_string(t.var));
    sum += static_cast<__int128>(t.coef) * it->second;
  }
  return sum;
}

__int128 evaluate(const LinearExpr& e, std::span<const std::int64_t> values) {
  __int128 sum = e.constant;
  for (const auto& t : e.terms) {
    if (t.var >= values.size()) throw std::out_of_range("no value for s" + std::to_string(t.var));
    sum += static_cast<__int128>(t.coef) * values[t.var];
  }
  return sum;
}

Relation negate(Relation r) {
  switch (r) {
    case Relation::lt: return Relation::ge;
    case Relation::le: return Relation::gt;
    case Relation::eq: return Relation::ne;
    case Relation::ne: return Relation::eq;
    case Relation::gt: return Relation::le;
    case Relation::ge: return Relation::lt;
  }
  return r;
}

std::string_view symbol(Relation r) {
  switch (r) {
    case Relation::lt: return "<";
    case Relation::le: return "<=";
    case Relation::eq: return "=";
    case Relation::ne: return "!=";
    case Relation::gt: return ">";
    case Relation::ge: return ">=";
  }
  return "?";
}

bool holds(Relation r, __int128 value) {
  switch (r) {
    case Relation::lt: return value < 0;
    case Relation::le: return value <= 0;
    case Relation::eq: return value == 0;
    case Relation::ne: return value != 0;
    case Relation::gt: return value > 0;
    case Relation::ge: return value >= 0;
  }
  return false;
}

bool satisfied(const Constraint& c, const Assignment& values) { return holds(c.rel, evaluate(c.lhs, values)); }

bool satisfied(const Constraint& c, std::span<const std::int64_t> values) {
  return holds(c.rel, evaluate(c.lhs, values));
}

bool satisfied(std::span<const Constraint> conjuncts, const Assignment& values) {
  for (const auto& c : conjuncts)
    if (!satisfied(c, values)) return false;
  return true;
}

std::string to_string(const LinearExpr& e) {
  std::string out;
  for (const auto& t : e.terms) {
    __int128 c = t.coef;
    if (out.empty()) {
      if (c == -1) out += "-";
      else if (c != 1) out += number(c) + "*";
    } else {
      out += c < 0 ? " - " : " + ";
      if (c < 0) c = -c;
      if (c != 1) out += number(c) + "*";
    }
    out += "s" + std::to_string(t.var);
  }
  if (out.empty()) return number(e.constant);
  if (e.constant > 0) out += " + " + number(e.constant);
  if (e.constant < 0) out += " - " + number(-static_cast<__int128>(e.constant));
  return out;
}

std::string to_string(const Constraint& c) {
  return to_string(c.lhs) + " " + std::string(symbol(c.rel)) + " 0";
}

}  // namespace wcfuzz::solver
