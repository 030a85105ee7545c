#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wcfuzz/solver/linear.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::solver {

/// Inclusive interval per variable, indexed by variable id.
using Domains = std::vector<vm::Interval>;

Domains domains_of(const vm::InputLayout& layout);

enum class Outcome : std::uint8_t { sat, unsat, indeterminate };

std::string_view to_string(Outcome outcome);

struct Options {
  std::uint64_t node_limit = 10'000'000;
  /// Preferred values, tried first when inside the current domain.
  const Assignment* hint = nullptr;
  /// Searches still running at this point end as indeterminate.
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct Result {
  Outcome outcome = Outcome::unsat;
  /// Values for every variable mentioned by the query. Under maximize with
  /// outcome indeterminate this holds the best model found, if any.
  Assignment model;
  std::optional<__int128> objective;
  std::uint64_t nodes = 0;
};

Result solve(std::span<const Constraint> conjuncts, const Domains& domains, Options options = {});

Result maximize(std::span<const Constraint> conjuncts, const LinearExpr& objective,
                const Domains& domains, Options options = {});

/// SMT-LIB2 query: QF_LIA declarations, domain bounds, one assert per
/// conjunct, then `(maximize ...)` when an objective is given.
std::string to_smtlib(std::span<const Constraint> conjuncts, const Domains& domains,
                      const std::optional<LinearExpr>& objective = std::nullopt);

/// Queries issued by solve/maximize on the calling thread.
std::uint64_t thread_query_count();
/// Queries issued by solve/maximize in the whole process.
std::uint64_t total_query_count();

}  // namespace wcfuzz::solver
