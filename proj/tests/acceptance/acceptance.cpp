// One pass/fail line per acceptance criterion. Exit status is nonzero when
// any selected criterion fails.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <random>
#include <regex>
#include <set>

#include "bruteforce.hpp"
#include "random_instances.hpp"
#include "smt_check.hpp"
#include "subject_oracles.hpp"
#include "wcfuzz/concolic/assess.hpp"
#include "wcfuzz/coordinator/campaign.hpp"
#include "wcfuzz/coordinator/generate.hpp"
#include "wcfuzz/explorer/explorer.hpp"
#include "wcfuzz/solver/solver.hpp"
#include "wcfuzz/subjects/subjects.hpp"
#include "wcfuzz/vm/bitmap.hpp"

using namespace wcfuzz;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using coordinator::CampaignConfig;
using coordinator::CampaignStats;
using coordinator::Mode;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename T>
T median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string join(const std::vector<std::uint64_t>& v) {
  return fmt::format("{}", fmt::join(v, "/"));
}

/// Campaigns run by any criterion, for the checks that span all of them.
struct Ledger {
  struct Entry {
    std::string label;
    std::string subject;
    std::size_t n = 0;
    bool has_symexe = false;
    std::uint64_t explore_solver_calls = 0;
    std::int64_t max_collisions = 0;
    bool collision_subject = false;
  };
  std::vector<Entry> entries;
};

class Acceptance {
 public:
  Acceptance(fs::path work, double scale) : work_(std::move(work)), scale_(scale) {}

  CampaignStats campaign(CampaignConfig c, const std::string& label) {
    c.sync_dir = work_ / label;
    fs::remove_all(c.sync_dir);
    c.budget_seconds *= scale_;
    auto stats = coordinator::run_campaign(c);
    Ledger::Entry e{label, stats.subject, stats.n, stats.symexe.has_value(), 0, stats.max_collisions,
                    stats.collision_counter.has_value()};
    if (stats.symexe) e.explore_solver_calls = stats.symexe->explore_solver_calls;
    ledger_.entries.push_back(e);
    if (stats.error) spdlog::error("{}: worker failed: {}", label, *stats.error);
    return stats;
  }

  Verdict c1();
  Verdict c2();
  Verdict c3();
  Verdict c4();
  Verdict c5();
  Verdict c6();
  Verdict c7();
  Verdict c8();
  Verdict c9();
  Verdict c10();

 private:
  fs::path work_;
  double scale_;
  Ledger ledger_;
};

// Insertion sort N=3 trie evolution from a sorted seed.
Verdict Acceptance::c1() {
  auto start = Clock::now();
  auto subject = subjects::load_subject("insertion_sort", 3);
  const auto& program = subject.program;
  const vm::Bytes seed = {0, 1, 2};
  const std::uint64_t c0 = vm::execute(program, seed, vm::CostModel::jumps).cost;
  if (c0 != testing::kInsertionSort3Sorted || testing::insertion_sort_jumps(seed) != c0)
    return {false, fmt::format("seed cost {} disagrees with the frozen oracle {}", c0, testing::kInsertionSort3Sorted)};

  trie::Trie t;
  concolic::Assessor assessor(program, vm::CostModel::jumps, t);
  assessor.assess(seed, concolic::AssessMode::import_mode, concolic::Origin::seed);

  // (a) root plus two choice-0 decisions at one site, all scored c0.
  if (t.node_count() != 3) return {false, fmt::format("(a) expected 3 nodes, got {}", t.node_count())};
  const auto& n1 = t.node(1);
  const auto& n2 = t.node(2);
  const std::size_t site = n1.decision->site;
  bool chain = n1.parent == &t.root() && n2.parent == &n1 && n1.decision->choice == 0 && n2.decision->choice == 0 &&
               n2.decision->site == site && n2.is_leaf() && !n1.is_leaf();
  for (std::size_t id = 0; id < 3; ++id) chain = chain && t.node(id).score == trie::Rational(c0);
  if (!chain) return {false, "(a) initial trie is not the scored chain:\n" + t.dump()};
  const auto* pick = t.select_most_promising(trie::Heuristic::lower);
  if (!pick || pick->id != 1) return {false, "(a) node 1 not selected"};

  // (b) depth-1 exploration from node 1 adds an unscored choice-1 sibling.
  auto task = explorer::make_task(t, *pick, 1);
  const auto queries = solver::thread_query_count();
  auto paths = explorer::bounded_explore(explorer::replay_to_node(program, task));
  if (solver::thread_query_count() != queries) return {false, "(b) exploration called the solver"};
  if (paths.size() != 1 || paths[0].conjuncts.size() != 2)
    return {false, fmt::format("(b) expected one two-conjunct condition, got {}", paths.size())};
  auto& placeholder = t.add_placeholder(t.node(1), paths[0].decisions[1]);
  if (placeholder.id != 3 || placeholder.decision->choice != 1 || placeholder.score)
    return {false, "(b) placeholder is not an unscored choice-1 node 3"};
  const std::string pc = solver::to_string(paths[0].conjuncts[0]) + " & " + solver::to_string(paths[0].conjuncts[1]);

  // (c) solve, generate, assess: a new leaf below node 3 with a higher cost.
  solver::Assignment hint = {{0, 0}, {1, 1}, {2, 2}};
  auto model = solver::solve(paths[0].conjuncts, concolic::path_domains(program.input_layout, paths[0]),
                             {.hint = &hint});
  if (model.outcome != solver::Outcome::sat) return {false, "(c) sibling condition unsolved"};
  auto input = coordinator::generate_input_file(concolic::input_part(model.model, 3), program.input_layout, seed);
  auto exported = assessor.assess(input, concolic::AssessMode::export_mode, concolic::Origin::exploration);
  const auto& n3 = t.node(3);
  if (n3.children.size() != 1) return {false, "(c) node 3 did not gain a leaf:\n" + t.dump()};
  const auto& leaf = *n3.children.begin()->second;
  const auto c1 = *leaf.leaf_cost;
  if (!(c1 > trie::Rational(c0))) return {false, "(c) new leaf does not beat the first"};
  if (*n3.score != c1) return {false, "(c) node 3 score differs from its leaf"};
  if (*t.node(1).score != (trie::Rational(c0) + c1) / 2) return {false, "(c) node 1 is not the mean of its children"};
  if (*t.root().score != *t.node(1).score) return {false, "(c) root not updated like node 1"};
  if (exported.size() != 1) return {false, "(c) new input not exported"};
  pick = t.select_most_promising(trie::Heuristic::lower);
  if (!pick || pick->id != 3) return {false, "(c) node 3 not selected next"};

  // The symexe worker, one iteration from the same seed, builds the same trie.
  coordinator::SymExeConfig sc;
  sc.program = &program;
  sc.seed_input = seed;
  sc.sync_dir = work_ / "c1";
  fs::remove_all(sc.sync_dir);
  sc.max_iterations = 1;
  sc.budget_seconds = 10;
  auto report = coordinator::run_symexe(sc);
  if (report.trie_dump != t.dump()) return {false, "worker trie differs:\n" + report.trie_dump + "vs\n" + t.dump()};

  double took = seconds_since(start);
  return {took < 10, fmt::format("chain of 3 at score {}; pc {}; leaf {} under node 3 (choice {}); node 1 = root = {}; "
                                 "{:.2f} s",
                                 c0, pc, trie::format_score(c1), leaf.decision->choice,
                                 trie::format_score(t.node(1).score), took)};
}

// Insertion sort N=8 worst case, badger and symexe.
Verdict Acceptance::c2() {
  auto subject = subjects::load_subject("insertion_sort", 8);
  vm::Bytes descending = {8, 7, 6, 5, 4, 3, 2, 1};
  const auto worst = vm::execute(subject.program, descending, vm::CostModel::jumps).cost;
  if (worst != testing::kInsertionSort8Worst || testing::insertion_sort_jumps(descending) != worst)
    return {false, fmt::format("oracle mismatch: VM {} vs frozen {}", worst, testing::kInsertionSort8Worst)};

  std::vector<std::uint64_t> costs;
  std::vector<std::string> times;
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CampaignConfig c;
    c.subject = "insertion_sort";
    c.n = 8;
    c.mode = Mode::badger;
    c.budget_seconds = 120;
    c.rng_seed = seed;
    c.stop_at_cost = worst;
    auto s = campaign(c, fmt::format("c2_badger_{}", seed));
    costs.push_back(s.best_cost);
    times.push_back(fmt::format("{:.1f}", s.elapsed_s));
    hits += s.best_cost == worst && !s.error;
  }
  CampaignConfig c;
  c.subject = "insertion_sort";
  c.n = 8;
  c.mode = Mode::symexe;
  c.budget_seconds = 300;
  c.stop_at_cost = worst;
  auto sym = campaign(c, "c2_symexe");
  bool sym_ok = sym.best_cost == worst && !sym.error;
  return {hits >= 4 && sym_ok,
          fmt::format("worst {}; badger {}/5 reached ({} in {} s); symexe {} in {:.1f} s", worst, hits, join(costs),
                      fmt::join(times, "/"), sym.best_cost, sym.elapsed_s)};
}

// Hash table, three modes, five seeds: median ordering.
Verdict Acceptance::c3() {
  std::map<Mode, std::vector<std::uint64_t>> finals;
  for (Mode m : {Mode::badger, Mode::kelinciwca, Mode::kelinci})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CampaignConfig c;
      c.subject = "hash_table";
      c.n = 16;
      c.mode = m;
      c.budget_seconds = 300;
      c.rng_seed = seed;
      auto s = campaign(c, fmt::format("c3_{}_{}", coordinator::to_string(m), seed));
      finals[m].push_back(s.best_cost);
    }
  auto b = median(finals[Mode::badger]), w = median(finals[Mode::kelinciwca]), k = median(finals[Mode::kelinci]);
  return {b >= w && w >= k, fmt::format("medians badger {} >= kelinciwca {} >= kelinci {} (badger {}; kelinciwca {}; "
                                        "kelinci {})",
                                        b, w, k, join(finals[Mode::badger]), join(finals[Mode::kelinciwca]),
                                        join(finals[Mode::kelinci]))};
}

// Collision cap: keys - 1 everywhere, attained with 64 keys in one bucket.
Verdict Acceptance::c4() {
  auto subject = subjects::load_subject("hash_table", 64);
  auto crafted = testing::one_bucket_input(64);
  auto r = vm::execute(subject.program, crafted, vm::CostModel::jumps);
  const auto idx = *subject.collision_counter_index();
  if (r.counters[idx] != 63) return {false, fmt::format("64 keys in one bucket gave {} collisions", r.counters[idx])};

  for (Mode m : {Mode::badger, Mode::kelinciwca}) {
    CampaignConfig c;
    c.subject = "hash_table";
    c.n = 64;
    c.mode = m;
    c.budget_seconds = 60;
    campaign(c, fmt::format("c4_{}", coordinator::to_string(m)));
  }
  std::size_t checked = 0;
  std::int64_t peak64 = 0;
  std::vector<std::string> over;
  for (const auto& e : ledger_.entries) {
    if (!e.collision_subject) continue;
    ++checked;
    if (e.n == 64) peak64 = std::max(peak64, e.max_collisions);
    if (e.max_collisions > static_cast<std::int64_t>(e.n) - 1)
      over.push_back(fmt::format("{}: {} > {}", e.label, e.max_collisions, e.n - 1));
  }
  return {over.empty(), over.empty() ? fmt::format("crafted 64-key input hits the cap of 63; {} hash_table campaigns "
                                                   "within keys-1 (64-key peak {})",
                                                   checked, peak64)
                                     : fmt::format("{}", fmt::join(over, "; "))};
}

// Solver against exhaustive enumeration.
Verdict Acceptance::c5() {
  auto start = Clock::now();
  std::mt19937_64 rng(5'000'005);
  solver::Domains bytes(3, vm::Interval{0, 255});
  int sat_mismatch = 0, max_mismatch = 0, unsound = 0, indeterminate = 0, sat = 0;
  constexpr int kInstances = 10'000;
  for (int k = 0; k < kInstances; ++k) {
    auto inst = testing::random_instance(rng);
    auto truth = testing::enumerate_three_bytes(inst.rows, inst.objective);
    auto s = solver::solve(inst.conjuncts, bytes);
    auto m = solver::maximize(inst.conjuncts, inst.objective_expr, bytes);
    if (s.outcome == solver::Outcome::indeterminate || m.outcome == solver::Outcome::indeterminate) {
      ++indeterminate;
      continue;
    }
    sat_mismatch += (s.outcome == solver::Outcome::sat) != truth.sat;
    sat_mismatch += (m.outcome == solver::Outcome::sat) != truth.sat;
    if (s.outcome == solver::Outcome::sat) unsound += !solver::satisfied(inst.conjuncts, s.model);
    if (m.outcome == solver::Outcome::sat) {
      unsound += !solver::satisfied(inst.conjuncts, m.model);
      unsound += solver::evaluate(inst.objective_expr, m.model) != *m.objective;
    }
    if (truth.sat) {
      ++sat;
      max_mismatch += !m.objective || static_cast<std::int64_t>(*m.objective) != *truth.max_objective;
    }
  }
  double took = seconds_since(start);
  bool ok = sat_mismatch == 0 && max_mismatch == 0 && unsound == 0 && indeterminate == 0 && took < 300;
  return {ok, fmt::format("{} instances ({} sat): {} sat mismatches, {} maximum mismatches, {} unsound models, {} "
                          "indeterminate; {:.1f} s",
                          kInstances, sat, sat_mismatch, max_mismatch, unsound, indeterminate, took)};
}

// sum example: maximize s1 + s2 under s1 > 0 and s2 > 0.
Verdict Acceptance::c6() {
  using solver::LinearExpr;
  solver::Domains d(3, vm::Interval{-100, 100});
  std::vector<solver::Constraint> pc = {{LinearExpr::variable(1), solver::Relation::gt},
                                        {LinearExpr::variable(2), solver::Relation::gt}};
  LinearExpr objective{{{1, 1}, {2, 1}}, 0};
  auto r = solver::maximize(pc, objective, d);
  bool value_ok = r.outcome == solver::Outcome::sat && r.objective == 200 && r.model.at(1) == 100 &&
                  r.model.at(2) == 100;

  auto text = solver::to_smtlib(pc, d, objective);
  auto squash = [](const std::string& s) { return std::regex_replace(s, std::regex("\\s+"), " "); };
  const std::string flat = squash(text);
  std::vector<std::string> missing;
  for (const char* line : {"(assert (> s1 0))", "(assert (> s2 0))", "(maximize (+ s1 s2))"})
    if (flat.find(squash(line)) == std::string::npos) missing.push_back(line);
  auto grammar = testing::check_smtlib(text);

  // End to end through the sum_arg subject.
  auto subject = subjects::load_subject("sum_arg", 2);
  trie::Trie t;
  concolic::Assessor assessor(subject.program, vm::CostModel::user_defined, t);
  auto out = assessor.assess(subject.program.input_layout.encode(std::vector<std::int64_t>{1, 2}),
                             concolic::AssessMode::import_mode, concolic::Origin::fuzzer);
  bool e2e = out.size() == 1 && subject.program.input_layout.decode(out[0]) == std::vector<std::int64_t>{100, 100} &&
             vm::execute(subject.program, out[0], vm::CostModel::user_defined).cost == 200;

  return {value_ok && missing.empty() && grammar.empty() && e2e,
          fmt::format("objective {} at s1={}, s2={}; SMT lines {}; grammar {}; sum_arg import [1,2] -> {}",
                      r.objective ? static_cast<long long>(*r.objective) : -1,
                      r.model.count(1) ? r.model.at(1) : -1, r.model.count(2) ? r.model.at(2) : -1,
                      missing.empty() ? "present" : "missing " + fmt::format("{}", fmt::join(missing, ", ")),
                      grammar.empty() ? "ok" : grammar, e2e ? "[100,100] cost 200" : "no maximizing export")};
}

// Bitmap semantics.
Verdict Acceptance::c7() {
  std::vector<std::string> failures;
  if (sizeof(vm::Bitmap{}.cells) != 65536) failures.push_back("map size");
  if (vm::bitmap_index(2, 8 >> 1) != 6 || vm::bitmap_index(8, 2 >> 1) != 9) failures.push_back("8/2 asymmetry");
  for (std::uint32_t b = 1; b < 65536; ++b)
    if (vm::bitmap_index(static_cast<std::uint16_t>(b), static_cast<std::uint16_t>(b >> 1)) == 0) {
      failures.push_back(fmt::format("tight loop on {} maps to 0", b));
      break;
    }

  // Random transition sequences against a plain reference.
  std::mt19937_64 rng(77);
  std::size_t asymmetric = 0, pairs = 0;
  for (int round = 0; round < 200; ++round) {
    auto bitmap = std::make_unique<vm::Bitmap>();
    std::map<std::uint16_t, std::uint64_t> reference;
    std::uint16_t prev = 0;
    const int steps = 1 + static_cast<int>(rng() % 2000);
    for (int s = 0; s < steps; ++s) {
      auto b = static_cast<std::uint16_t>(round % 2 ? rng() % 16 : rng());
      ++reference[static_cast<std::uint16_t>(b ^ prev)];
      prev = static_cast<std::uint16_t>(b >> 1);
      bitmap->record(b);
    }
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < vm::kMapSize; ++i) {
      auto it = reference.find(static_cast<std::uint16_t>(i));
      std::uint64_t expect = it == reference.end() ? 0 : std::min<std::uint64_t>(it->second, 255);
      if (bitmap->cells[i] != expect) {
        failures.push_back(fmt::format("cell {} = {} vs reference {}", i, bitmap->cells[i], expect));
        break;
      }
      total += it == reference.end() ? 0 : it->second;
    }
    if (total != static_cast<std::uint64_t>(steps) || bitmap->transitions != static_cast<std::uint64_t>(steps))
      failures.push_back("increment count not conserved");
    auto a = static_cast<std::uint16_t>(rng()), b = static_cast<std::uint16_t>(rng());
    if (a != b) {
      ++pairs;
      asymmetric += vm::bitmap_index(b, a >> 1) != vm::bitmap_index(a, b >> 1);
    }
  }
  if (asymmetric != pairs) failures.push_back("a->b equals b->a for random distinct pairs");

  // Subject runs: unsaturated maps conserve the jump count.
  std::size_t runs = 0;
  for (const auto& s : subjects::list_subjects()) {
    for (int k = 0; k < 20; ++k) {
      vm::Bytes in(s.program.input_layout.byte_length());
      for (auto& x : in) x = static_cast<std::uint8_t>(rng());
      auto r = vm::execute(s.program, in, vm::CostModel::jumps);
      if (r.bitmap->transitions != r.jumps) failures.push_back(s.name() + ": transitions != jumps");
      std::uint64_t sum = 0;
      bool saturated = false;
      for (auto c : r.bitmap->cells) {
        sum += c;
        saturated |= c == 255;
      }
      if (!saturated && sum != r.jumps) failures.push_back(s.name() + ": cell sum != jumps");
      ++runs;
    }
  }
  return {failures.empty(), failures.empty() ? fmt::format("64 KiB map; 8->2 at 6, 2->8 at 9; 65535 self-loops off "
                                                           "cell 0; {} reference sequences and {} subject runs conserve "
                                                           "increments",
                                                           200, runs)
                                             : fmt::format("{}", fmt::join(failures, "; "))};
}

// Every symexe export had new coverage or a new symexe highscore.
Verdict Acceptance::c8() {
  auto subject = subjects::load_subject("quicksort", 8);
  std::size_t exports = 0, violations = 0, records = 0;
  std::vector<std::string> notes;
  // Five badger runs, then one symexe run, which exports far more often.
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    CampaignConfig c;
    c.subject = "quicksort";
    c.n = 8;
    c.mode = seed <= 5 ? Mode::badger : Mode::symexe;
    c.budget_seconds = 30;
    c.rng_seed = seed;
    auto s = campaign(c, fmt::format("c8_{}", seed));
    if (!s.symexe) return {false, "no symexe report"};
    std::set<trie::Decision> seen;
    std::uint64_t high = 0;
    std::size_t run_exports = 0;
    for (const auto& rec : s.symexe->audit) {
      ++records;
      auto replay = concolic::concolic_execute(subject.program, rec.input, vm::CostModel::jumps);
      if (replay.status == vm::Status::error) continue;
      const auto cost = vm::execute(subject.program, rec.input, vm::CostModel::jumps).cost;
      if (cost != rec.cost) ++violations;
      bool fresh = false;
      for (const auto& d : replay.path.decisions) fresh |= seen.insert(d).second;
      if (rec.exported) {
        ++run_exports;
        if (!(fresh || cost > high)) ++violations;
      }
      high = std::max(high, cost);
    }
    std::size_t files = 0;
    for (const auto& f : fs::directory_iterator(work_ / fmt::format("c8_{}", seed) / "symexe" / "queue"))
      files += !f.path().filename().string().starts_with(".");
    if (files != run_exports || run_exports != s.symexe->exported)
      notes.push_back(fmt::format("run {}: {} files vs {} audited exports", seed, files, run_exports));
    exports += run_exports;
  }
  return {violations == 0 && notes.empty() && exports > 0,
          fmt::format("{} exports over 6 runs ({} assessments replayed), {} violations{}", exports, records, violations,
                      notes.empty() ? "" : "; " + fmt::format("{}", fmt::join(notes, "; ")))};
}

// Replay and bounded exploration never solve.
Verdict Acceptance::c9() {
  for (const char* name : {"regex_toy", "sum_arg", "gas_contract", "quicksort", "hash_table", "insertion_sort"}) {
    CampaignConfig c;
    c.subject = name;
    c.mode = Mode::badger;
    c.budget_seconds = 10;
    campaign(c, fmt::format("c9_{}", name));
  }
  std::size_t checked = 0;
  std::uint64_t total = 0;
  std::vector<std::string> bad;
  for (const auto& e : ledger_.entries) {
    if (!e.has_symexe) continue;
    ++checked;
    total += e.explore_solver_calls;
    if (e.explore_solver_calls) bad.push_back(e.label);
  }
  return {bad.empty() && checked > 0,
          fmt::format("{} campaigns with a symexe worker, {} solver calls during replay/exploration{}", checked, total,
                      bad.empty() ? "" : " in " + fmt::format("{}", fmt::join(bad, ", ")))};
}

// Gas contract: symbolic cost maximization reaches the brute-force maximum.
Verdict Acceptance::c10() {
  auto subject = subjects::load_subject("gas_contract", 5);
  const auto& layout = subject.program.input_layout;
  const auto brute = testing::gas_bruteforce_max(5, layout.domain(0).lo, layout.domain(0).hi);
  if (brute != testing::kGas5Max) return {false, fmt::format("oracle gave {}, frozen {}", brute, testing::kGas5Max)};
  // The reference gas table matches the VM on random inputs.
  std::mt19937_64 rng(10);
  for (int k = 0; k < 20'000; ++k) {
    vm::Bytes in(layout.byte_length());
    for (auto& b : in) b = static_cast<std::uint8_t>(rng());
    std::int64_t expect = 0;
    for (auto v : layout.decode(in)) expect += testing::gas_item(v);
    if (vm::execute(subject.program, in, vm::CostModel::user_defined).cost != static_cast<std::uint64_t>(expect))
      return {false, "gas oracle disagrees with the VM"};
  }

  int hits = 0;
  std::vector<std::uint64_t> costs;
  std::vector<std::string> notes;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CampaignConfig c;
    c.subject = "gas_contract";
    c.n = 5;
    c.mode = Mode::badger;
    c.budget_seconds = 120;
    c.rng_seed = seed;
    c.stop_at_cost = static_cast<std::uint64_t>(brute);
    auto s = campaign(c, fmt::format("c10_{}", seed));
    costs.push_back(s.best_cost);
    std::size_t maximized = 0;
    if (s.symexe)
      for (const auto& rec : s.symexe->audit)
        maximized += rec.exported && rec.origin == concolic::Origin::maximization;
    notes.push_back(fmt::format("{:.2f} s/{} max exports", s.elapsed_s, maximized));
    hits += s.best_cost == static_cast<std::uint64_t>(brute) && maximized > 0 && !s.error;
  }
  return {hits >= 4, fmt::format("brute-force max {} over 21^5; {}/5 runs reached it with maximization exports ({}; "
                                 "{})",
                                 brute, hits, join(costs), fmt::join(notes, ", "))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::string work = (fs::temp_directory_path() / "wcfuzz_acceptance").string();
  double scale = 1.0;
  std::string report_path;
  app.add_option("--criterion", selected, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--work-dir", work, "Scratch directory for campaign output")->capture_default_str();
  app.add_option("--budget-scale", scale, "Multiplier for campaign budgets (1 = as specified)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--report", report_path, "Also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  // Criterion 9 covers every campaign, so it runs last.
  if (auto it = std::find(selected.begin(), selected.end(), 9); it != selected.end()) {
    selected.erase(it);
    selected.push_back(9);
  }
  if (scale != 1.0) fmt::print("note: campaign budgets scaled by {}\n", scale);

  Acceptance acc(work, scale);
  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria = {
      {1, {"trie evolution golden (insertion_sort N=3)", [&] { return acc.c1(); }}},
      {2, {"worst case found (insertion_sort N=8)", [&] { return acc.c2(); }}},
      {3, {"mode ordering on hash_table", [&] { return acc.c3(); }}},
      {4, {"hash collision bound", [&] { return acc.c4(); }}},
      {5, {"solver vs exhaustive enumeration", [&] { return acc.c5(); }}},
      {6, {"maximization worked example", [&] { return acc.c6(); }}},
      {7, {"bitmap semantics", [&] { return acc.c7(); }}},
      {8, {"export-policy soundness (quicksort N=8)", [&] { return acc.c8(); }}},
      {9, {"no solving during replay and exploration", [&] { return acc.c9(); }}},
      {10, {"symbolic cost end to end (gas_contract N=5)", [&] { return acc.c10(); }}},
  };

  std::FILE* report = report_path.empty() ? nullptr : std::fopen(report_path.c_str(), "w");
  int failed = 0;
  for (int id : selected) {
    const auto& [title, run] = criteria.at(id);
    auto start = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    failed += !v.pass;
    auto line = fmt::format("C{:<2} {} {}: {} [{:.1f} s]\n", id, v.pass ? "PASS" : "FAIL", title, v.detail,
                            seconds_since(start));
    fmt::print("{}", line);
    std::fflush(stdout);
    if (report) {
      fmt::print(report, "{}", line);
      std::fflush(report);
    }
  }
  if (report) std::fclose(report);
  return failed == 0 ? 0 : 1;
}
