#include <catch_amalgamated.hpp>

#include <random>

#include "bruteforce.hpp"
#include "random_instances.hpp"
#include "smt_check.hpp"
#include "wcfuzz/solver/solver.hpp"

using namespace wcfuzz::solver;
using wcfuzz::vm::Interval;

namespace {

LinearExpr expr(std::initializer_list<Term> terms, std::int64_t constant = 0) {
  return LinearExpr{terms, constant};
}

Domains bytes3() { return Domains(3, Interval{0, 255}); }

}  // namespace

TEST_CASE("linear expressions combine and detect overflow", "[solver][linear]") {
  auto a = expr({{0, 2}, {2, 1}}, 3);
  auto b = expr({{1, 4}, {2, -1}}, -3);
  auto sum = add(a, b);
  REQUIRE(sum);
  CHECK(*sum == expr({{0, 2}, {1, 4}}, 0));
  auto diff = subtract(a, a);
  REQUIRE(diff);
  CHECK(diff->is_constant());
  CHECK(diff->constant == 0);
  CHECK_FALSE(scale(expr({{0, INT64_MAX}}), 2));
  CHECK(to_string(Constraint{expr({{0, 1}, {1, -1}}), Relation::le}) == "s0 - s1 <= 0");
}

TEST_CASE("solve finds a model for the insertion sort condition", "[solver]") {
  // s0 <= s1 and s1 > s2
  std::vector<Constraint> pc{{expr({{0, 1}, {1, -1}}), Relation::le},
                             {expr({{1, 1}, {2, -1}}), Relation::gt}};
  auto r = solve(pc, bytes3());
  REQUIRE(r.outcome == Outcome::sat);
  CHECK(satisfied(pc, r.model));
  CHECK(r.model == Assignment{{0, 0}, {1, 1}, {2, 0}});
}

TEST_CASE("solve reports empty intervals as unsat", "[solver]") {
  std::vector<Constraint> pc{{expr({{0, 1}}, -5), Relation::gt}, {expr({{0, 1}}, -3), Relation::lt}};
  CHECK(solve(pc, bytes3()).outcome == Outcome::unsat);
}

TEST_CASE("solve honours hints and parity", "[solver]") {
  std::vector<Constraint> pc{{expr({{0, 1}}, -10), Relation::ge}};
  Assignment hint{{0, 77}};
  auto r = solve(pc, bytes3(), {.hint = &hint});
  REQUIRE(r.outcome == Outcome::sat);
  CHECK(r.model.at(0) == 77);

  // 2*s0 - 2*s1 = 1 has no integer solution.
  std::vector<Constraint> parity{{expr({{0, 2}, {1, -2}}, -1), Relation::eq}};
  CHECK(solve(parity, bytes3()).outcome == Outcome::unsat);
}

TEST_CASE("node limit yields indeterminate", "[solver]") {
  std::vector<Constraint> pc{{expr({{0, 3}, {1, 5}, {2, -7}}, -1), Relation::eq},
                             {expr({{0, 1}, {1, 1}, {2, 1}}, -700), Relation::gt}};
  auto r = solve(pc, bytes3(), {.node_limit = 3});
  CHECK(r.outcome == Outcome::indeterminate);
}

TEST_CASE("maximize reproduces the sum example", "[solver]") {
  Domains d(3, Interval{-100, 100});
  std::vector<Constraint> pc{{expr({{1, 1}}), Relation::gt}, {expr({{2, 1}}), Relation::gt}};
  auto r = maximize(pc, expr({{1, 1}, {2, 1}}), d);
  REQUIRE(r.outcome == Outcome::sat);
  CHECK(r.objective == 200);
  CHECK(r.model == Assignment{{1, 100}, {2, 100}});
}

TEST_CASE("maximize with an empty condition returns the domain maximum", "[solver]") {
  auto r = maximize({}, expr({{1, 1}}), bytes3());
  REQUIRE(r.outcome == Outcome::sat);
  CHECK(r.model.at(1) == 255);
}

TEST_CASE("solver agrees with exhaustive enumeration", "[solver][oracle]") {
  std::mt19937_64 rng(20240611);
  int sat = 0;
  for (int k = 0; k < 60; ++k) {
    auto inst = wcfuzz::testing::random_instance(rng);
    auto truth = wcfuzz::testing::enumerate_three_bytes(inst.rows, inst.objective);
    auto s = solve(inst.conjuncts, bytes3());
    REQUIRE(s.outcome != Outcome::indeterminate);
    CHECK((s.outcome == Outcome::sat) == truth.sat);
    if (s.outcome == Outcome::sat) CHECK(satisfied(inst.conjuncts, s.model));
    auto m = maximize(inst.conjuncts, inst.objective_expr, bytes3());
    REQUIRE(m.outcome != Outcome::indeterminate);
    CHECK((m.outcome == Outcome::sat) == truth.sat);
    if (truth.sat) {
      sat += 1;
      CHECK(static_cast<std::int64_t>(*m.objective) == *truth.max_objective);
    }
  }
  CHECK(sat > 5);
}

TEST_CASE("SMT-LIB2 export", "[solver][smt]") {
  Domains d(3, Interval{-100, 100});
  std::vector<Constraint> pc{{expr({{1, 1}}), Relation::gt}, {expr({{2, 1}}), Relation::gt}};
  auto text = to_smtlib(pc, d, expr({{1, 1}, {2, 1}}));
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("(assert (> s1 0))"));
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("(assert (> s2 0))"));
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("(maximize (+ s1 s2))"));
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("(declare-const s1 Int)"));
  CHECK(wcfuzz::testing::check_smtlib(text).empty());

  auto empty = to_smtlib({}, d);
  CHECK_THAT(empty, !Catch::Matchers::ContainsSubstring("assert"));
  CHECK(wcfuzz::testing::check_smtlib(empty).empty());

  std::vector<Constraint> mixed{{expr({{0, 2}, {1, -3}}, 5), Relation::ne},
                                {expr({{0, -1}}, -7), Relation::le}};
  auto t = to_smtlib(mixed, bytes3(), expr({{0, -2}}, 4));
  CHECK_THAT(t, Catch::Matchers::ContainsSubstring("(not (= (* 2 s0) (+ (* 3 s1) (- 5))))"));
  CHECK(wcfuzz::testing::check_smtlib(t).empty());
  CHECK_FALSE(wcfuzz::testing::check_smtlib("(assert (> x 0))").empty());
  CHECK_FALSE(wcfuzz::testing::check_smtlib("(assert (> 1 0)").empty());
}

TEST_CASE("query counters", "[solver]") {
  auto before_thread = thread_query_count();
  auto before_total = total_query_count();
  solve({}, bytes3());
  maximize({}, expr({{0, 1}}), bytes3());
  CHECK(thread_query_count() - before_thread == 2);
  CHECK(total_query_count() - before_total == 2);
}
