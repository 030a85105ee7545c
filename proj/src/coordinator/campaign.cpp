#include "wcfuzz/coordinator/campaign.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "wcfuzz/coordinator/generate.hpp"
#include "wcfuzz/explorer/explorer.hpp"
#include "wcfuzz/solver/solver.hpp"
#include "wcfuzz/subjects/subjects.hpp"

namespace wcfuzz::coordinator {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::badger: return "badger";
    case Mode::kelinciwca: return "kelinciwca";
    case Mode::kelinci: return "kelinci";
    case Mode::symexe: return "symexe";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view text) {
  for (Mode m : kModeOrder)
    if (to_string(m) == text) return m;
  return std::nullopt;
}

namespace {

class SymExe {
 public:
  SymExe(const SymExeConfig& config, std::stop_token stop)
      : cfg_(config),
        stop_(std::move(stop)),
        epoch_(config.epoch.value_or(Clock::now())),
        assessor_(*config.program, config.cost_model, trie_, config.instruction_budget),
        peers_(config.sync_dir, config.instance_id) {
    assessor_.set_clock([this] { return elapsed(); });
    assessor_.set_deadline([this] { return solver_deadline(); });
  }

  SymExeReport run() {
    own_queue_ = cfg_.sync_dir / cfg_.instance_id / "queue";
    fs::create_directories(own_queue_);
    last_flush_ = elapsed();
    std::uint64_t solver_start = solver::thread_query_count();

    vm::Bytes seed = cfg_.seed_input;
    seed.resize(std::max(seed.size(), cfg_.program->input_layout.byte_length()));
    observe(assessor_.assess(seed, concolic::AssessMode::import_mode, concolic::Origin::seed));

    bool force_import = false;
    while (!done()) {
      if (cfg_.import_interval && (force_import || report_.iterations % cfg_.import_interval == 0)) {
        import_peers();
        force_import = false;
      }
      const trie::TrieNode* target = trie_.select_most_promising(cfg_.heuristic);
      if (!target) {
        if (!cfg_.import_interval || !peers_.has_peers()) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        force_import = true;
        continue;
      }
      std::uint64_t exported_before = report_.exported;
      iterate(*target);
      ++report_.iterations;
      idle_streak_ = report_.exported > exported_before ? 0 : idle_streak_ + 1;
      if (cfg_.import_interval && cfg_.idle_backoff_max_ms > 0 && idle_streak_ > 0 && peers_.has_peers())
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
            std::min(cfg_.idle_backoff_max_ms, static_cast<double>(idle_streak_))));
    }
    report_.solver_calls = solver::thread_query_count() - solver_start;
    report_.best_cost = assessor_.highscore();
    report_.best_input = assessor_.best_input();
    report_.audit = assessor_.audit();
    report_.trie_nodes = trie_.node_count();
    report_.trie_dump = trie_.dump();
    flush();
    return std::move(report_);
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - epoch_).count(); }

  bool done() {
    if (stop_.stop_requested()) return true;
    if (cfg_.max_iterations && report_.iterations >= cfg_.max_iterations) return true;
    if (cfg_.stop_at_cost && assessor_.has_assessed() && assessor_.highscore() >= *cfg_.stop_at_cost) return true;
    double now = elapsed();
    if (now - last_flush_ >= cfg_.stats_flush_seconds) flush();
    return cfg_.budget_seconds > 0 && now >= cfg_.budget_seconds;
  }

  void iterate(const trie::TrieNode& target_const) {
    auto& target = trie_.node(target_const.id);
    auto task = explorer::make_task(trie_, target, cfg_.bse_depth);
    auto unexplored = target.unexplored_choices();
    std::size_t site = *target.next_site;

    std::uint64_t before = solver::thread_query_count();
    std::vector<concolic::PathCondition> frontier;
    try {
      auto state = explorer::replay_to_node(*cfg_.program, task, cfg_.instruction_budget);
      frontier = explorer::bounded_explore(state);
    } catch (const explorer::Divergence& e) {
      ++report_.divergences;
      spdlog::warn("symexe: node {} diverged: {}", target.id, e.what());
    }
    report_.explore_solver_calls += solver::thread_query_count() - before;

    // A placeholder stays infeasible unless some frontier path through it
    // has a model.
    std::map<trie::Decision, bool> feasible;
    const std::size_t depth = task.prefix.size();
    std::vector<vm::Bytes> generated;
    for (const auto& pc : frontier) {
      if (pc.decisions.size() <= depth) continue;
      trie::Decision first = pc.decisions[depth];
      trie_.add_placeholder(target, first);
      feasible.try_emplace(first, false);

      solver::Assignment hint;
      auto values = cfg_.program->input_layout.decode(task.witness);
      for (std::size_t i = 0; i < values.size(); ++i) hint[static_cast<solver::Var>(i)] = values[i];
      auto started = Clock::now();
      auto result = solver::solve(pc.conjuncts, concolic::path_domains(cfg_.program->input_layout, pc),
                                  {.hint = &hint, .deadline = solver_deadline()});
      spdlog::debug("symexe: node {} {} -> {} after {} nodes, {:.1f} ms", target.id, pc.conjuncts.size(),
                    solver::to_string(result.outcome), result.nodes,
                    std::chrono::duration<double, std::milli>(Clock::now() - started).count());
      if (result.outcome == solver::Outcome::indeterminate) ++report_.solver_timeouts;
      if (result.outcome != solver::Outcome::sat) continue;
      feasible[first] = true;
      const auto& layout = cfg_.program->input_layout;
      generated.push_back(
          generate_input_file(concolic::input_part(result.model, layout.value_count()), layout, task.witness));
    }
    for (int choice : unexplored) {
      trie::Decision d{site, choice};
      if (!feasible.count(d)) {
        trie_.add_placeholder(target, d);
        feasible.emplace(d, false);
      }
    }
    for (const auto& [d, ok] : feasible)
      if (!ok) trie_.node(target.children.at(d)->id).infeasible = true;

    for (const auto& input : generated) {
      if (done()) break;
      auto exported = assessor_.assess(input, concolic::AssessMode::export_mode, concolic::Origin::exploration);
      observe(exported);
    }
  }

  Clock::time_point solver_deadline() const {
    auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                       std::chrono::duration<double>(cfg_.solver_timeout_seconds));
    if (cfg_.budget_seconds > 0)
      deadline = std::min(deadline, epoch_ + std::chrono::duration_cast<Clock::duration>(
                                                 std::chrono::duration<double>(cfg_.budget_seconds)));
    return deadline;
  }

  void import_peers() {
    for (auto& [path, data] : peers_.poll()) {
      if (data.size() < cfg_.program->input_layout.byte_length()) continue;
      ++report_.imported;
      observe(assessor_.assess(data, concolic::AssessMode::import_mode, concolic::Origin::fuzzer));
      if (stop_.stop_requested()) return;
    }
  }

  void observe(const std::vector<vm::Bytes>& exported) {
    for (const auto& input : exported)
      fuzzer::write_file_atomic(own_queue_ / fuzzer::queue_file_name(report_.exported++), input);
    const auto& audit = assessor_.audit();
    for (; audited_ < audit.size(); ++audited_) {
      const auto& rec = audit[audited_];
      if (cfg_.collision_counter && *cfg_.collision_counter < rec.counters.size())
        report_.max_collisions = std::max(report_.max_collisions, rec.counters[*cfg_.collision_counter]);
    }
    std::uint64_t high = assessor_.highscore();
    if (!assessor_.has_assessed()) return;
    if (report_.history.empty() || high > report_.history.back().second) {
      double t = elapsed();
      if (!report_.history.empty() && t <= report_.history.back().first)
        report_.history.back().second = high;
      else
        report_.history.emplace_back(t, high);
    }
  }

  void flush() {
    last_flush_ = elapsed();
    fs::path dir = cfg_.sync_dir / cfg_.instance_id;
    fuzzer::write_file_atomic(dir / "stats.csv", fuzzer::history_csv(report_.history));
    fuzzer::write_file_atomic(dir / "highscore", fmt::format("{}\n", assessor_.highscore()));
  }

  const SymExeConfig& cfg_;
  std::stop_token stop_;
  Clock::time_point epoch_;
  trie::Trie trie_;
  concolic::Assessor assessor_;
  fuzzer::PeerScanner peers_;
  fs::path own_queue_;
  double last_flush_ = 0;
  std::size_t audited_ = 0;
  std::uint64_t idle_streak_ = 0;
  SymExeReport report_;
};

}  // namespace

SymExeReport run_symexe(const SymExeConfig& config, std::stop_token stop) {
  if (!config.program) throw std::invalid_argument("run_symexe needs a program");
  if (config.bse_depth == 0) throw std::invalid_argument("BSE depth must be at least 1");
  return SymExe(config, std::move(stop)).run();
}

double CampaignStats::slowdown() const {
  if (seed_cost == 0) return best_cost == 0 ? 1.0 : static_cast<double>(best_cost);
  return static_cast<double>(best_cost) / static_cast<double>(seed_cost);
}

History merge_histories(const std::vector<const History*>& histories) {
  std::vector<std::pair<double, std::uint64_t>> points;
  for (const auto* h : histories) points.insert(points.end(), h->begin(), h->end());
  std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  History merged;
  for (const auto& [t, c] : points) {
    if (!merged.empty() && c <= merged.back().second) continue;
    if (!merged.empty() && t <= merged.back().first)
      merged.back().second = c;
    else
      merged.emplace_back(t, c);
  }
  return merged;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) out += fmt::format("{:02x}", b);
  return out;
}

std::string format_report(const CampaignStats& s) {
  std::string out;
  out += fmt::format("subject: {}\n", s.subject);
  out += fmt::format("n: {}\n", s.n);
  out += fmt::format("mode: {}\n", to_string(s.mode));
  out += fmt::format("cost_model: {}\n", vm::to_string(s.cost_model));
  out += fmt::format("seed_cost: {}\n", s.seed_cost);
  out += fmt::format("best_cost: {}\n", s.best_cost);
  out += fmt::format("slowdown: {:.4f}\n", s.slowdown());
  out += fmt::format("best_input_hex: {}\n", hex(s.best_input));
  out += fmt::format("elapsed_s: {:.3f}\n", s.elapsed_s);
  if (s.collision_counter) out += fmt::format("max_collisions: {}\n", s.max_collisions);
  if (s.fuzz) out += fmt::format("fuzzer_execs: {}\nfuzzer_queue: {}\n", s.fuzz->execs, s.fuzz->queue.size());
  if (s.symexe)
    out += fmt::format("symexe_iterations: {}\nsymexe_exported: {}\nsymexe_trie_nodes: {}\n", s.symexe->iterations,
                       s.symexe->exported, s.symexe->trie_nodes);
  out += fmt::format("solver_queries: {}\n", s.solver_queries);
  if (s.error) out += fmt::format("error: {}\n", *s.error);
  return out;
}

CampaignStats run_campaign(const CampaignConfig& config, std::stop_token stop) {
  auto subject = subjects::load_subject(config.subject, config.n);
  if (config.budget_seconds <= 0 && config.fuzz_max_execs == 0 && config.symexe_max_iterations == 0)
    throw std::invalid_argument("campaign needs a time or iteration budget");

  CampaignStats stats;
  stats.subject = subject.name();
  stats.mode = config.mode;
  stats.cost_model = config.cost_model.value_or(subject.manifest.cost_model);
  stats.n = subject.n;
  stats.collision_counter = subject.collision_counter_index();
  vm::Bytes seed = config.seed_input.value_or(subject.seed_input);
  if (seed.size() < subject.program.input_layout.byte_length())
    throw std::invalid_argument("seed input is shorter than the subject's input layout");

  auto seed_run = vm::execute(subject.program, seed, stats.cost_model);
  stats.seed_cost = seed_run.cost;
  stats.seed_status = seed_run.status;

  fs::create_directories(config.sync_dir);
  const auto epoch = Clock::now();
  const std::uint64_t solver_before = solver::total_query_count();
  const std::uint64_t trie_before = trie::operation_count();

  std::stop_source shared;
  std::stop_callback forward(stop, [&shared] { shared.request_stop(); });
  std::mutex error_mutex;
  auto fail = [&](std::string_view worker, const std::exception& e) {
    std::lock_guard lock(error_mutex);
    if (!stats.error) stats.error = fmt::format("{} worker failed: {}", worker, e.what());
    spdlog::error("{} worker failed: {}", worker, e.what());
    shared.request_stop();
  };

  const bool with_fuzzer = config.mode != Mode::symexe;
  const bool with_symexe = config.mode == Mode::badger || config.mode == Mode::symexe;

  fuzzer::FuzzConfig fc;
  fc.program = &subject.program;
  fc.seed_input = seed;
  fc.cost_model = stats.cost_model;
  fc.mode = config.mode == Mode::kelinci ? fuzzer::Mode::kelinci : fuzzer::Mode::kelinciwca;
  fc.sync_dir = config.sync_dir;
  fc.instance_id = "fuzzer";
  fc.budget_seconds = config.budget_seconds;
  fc.max_execs = config.fuzz_max_execs;
  fc.stop_at_cost = config.stop_at_cost;
  fc.rng_seed = config.rng_seed;
  fc.epoch = epoch;

  SymExeConfig sc;
  sc.program = &subject.program;
  sc.seed_input = seed;
  sc.cost_model = stats.cost_model;
  sc.sync_dir = config.sync_dir;
  sc.import_interval = config.mode == Mode::badger ? config.import_interval : 0;
  sc.bse_depth = config.bse_depth;
  sc.heuristic = config.heuristic;
  sc.budget_seconds = config.budget_seconds;
  sc.max_iterations = config.symexe_max_iterations;
  sc.stop_at_cost = config.stop_at_cost;
  sc.collision_counter = stats.collision_counter;
  sc.epoch = epoch;
  if (sc.bse_depth == 0) throw std::invalid_argument("BSE depth must be at least 1");

  {
    std::jthread fuzz_thread, symexe_thread;
    if (with_fuzzer)
      fuzz_thread = std::jthread([&] {
        try {
          stats.fuzz = fuzzer::fuzz_loop(fc, shared.get_token(), stats.collision_counter);
        } catch (const std::exception& e) {
          fail("fuzzer", e);
        }
        // The reached target ends the whole campaign.
        if (config.stop_at_cost && stats.fuzz && stats.fuzz->highscore.best_cost >= *config.stop_at_cost)
          shared.request_stop();
      });
    if (with_symexe)
      symexe_thread = std::jthread([&] {
        try {
          stats.symexe = run_symexe(sc, shared.get_token());
        } catch (const std::exception& e) {
          fail("symexe", e);
        }
        if (config.stop_at_cost && stats.symexe && stats.symexe->best_cost >= *config.stop_at_cost)
          shared.request_stop();
        // Symexe alone ends when the trie is exhausted; with a fuzzer the
        // fuzzer's own budget decides.
      });
  }

  stats.elapsed_s = std::chrono::duration<double>(Clock::now() - epoch).count();
  stats.solver_queries = solver::total_query_count() - solver_before;
  stats.trie_operations = trie::operation_count() - trie_before;

  std::vector<const History*> parts;
  stats.best_cost = stats.seed_cost;
  stats.best_input = seed;
  if (stats.fuzz) {
    stats.histories["fuzzer"] = stats.fuzz->highscore.history;
    if (stats.fuzz->highscore.best_cost > stats.best_cost) {
      stats.best_cost = stats.fuzz->highscore.best_cost;
      stats.best_input = stats.fuzz->highscore.best_input;
    }
    stats.max_collisions = std::max(stats.max_collisions, stats.fuzz->max_collisions);
  }
  if (stats.symexe) {
    stats.histories["symexe"] = stats.symexe->history;
    if (stats.symexe->best_cost > stats.best_cost) {
      stats.best_cost = stats.symexe->best_cost;
      stats.best_input = stats.symexe->best_input;
    }
    stats.max_collisions = std::max(stats.max_collisions, stats.symexe->max_collisions);
  }
  for (const auto& [name, h] : stats.histories) parts.push_back(&h);
  stats.merged = merge_histories(parts);

  fuzzer::write_file_atomic(config.sync_dir / "stats_merged.csv", fuzzer::history_csv(stats.merged, "best_cost"));
  fuzzer::write_file_atomic(config.sync_dir / "report.txt", format_report(stats));
  return stats;
}

}  // namespace wcfuzz::coordinator
