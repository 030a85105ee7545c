#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <stop_token>

#include "wcfuzz/cli/compare.hpp"
#include "wcfuzz/concolic/concolic.hpp"
#include "wcfuzz/coordinator/campaign.hpp"
#include "wcfuzz/solver/solver.hpp"
#include "wcfuzz/subjects/subjects.hpp"

using namespace wcfuzz;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::stop_source g_stop;

extern "C" void on_signal(int) { g_stop.request_stop(); }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

subjects::SubjectSpec subject_or_usage(const std::string& name, std::optional<std::size_t> n) {
  try {
    return subjects::load_subject(name, n);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

vm::CostModel cost_model_or(const std::string& text, vm::CostModel fallback) {
  if (text.empty()) return fallback;
  auto m = vm::parse_cost_model(text);
  if (!m) throw UsageError(fmt::format("unknown cost model '{}'", text));
  return *m;
}

vm::Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("{}: cannot open", path.string()));
  return vm::Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct RunArgs {
  std::string mode = "badger";
  std::string subject;
  std::optional<std::size_t> n;
  std::string cost_model;
  double budget_seconds = 60;
  std::uint64_t rng_seed = 1;
  std::string heuristic = "lower";
  std::size_t bse_depth = 1;
  std::size_t import_interval = 10;
  std::string sync_dir = "out";
  std::optional<std::uint64_t> stop_at_cost;
  std::uint64_t max_execs = 0;
  std::uint64_t max_iterations = 0;
  std::string seed_file;
};

int cmd_run(const RunArgs& a) {
  coordinator::CampaignConfig c;
  auto mode = coordinator::parse_mode(a.mode);
  if (!mode) throw UsageError(fmt::format("unknown mode '{}'", a.mode));
  auto heuristic = trie::parse_heuristic(a.heuristic);
  if (!heuristic) throw UsageError(fmt::format("unknown heuristic '{}'", a.heuristic));
  auto subject = subject_or_usage(a.subject, a.n);
  c.subject = a.subject;
  c.n = a.n;
  c.cost_model = cost_model_or(a.cost_model, subject.manifest.cost_model);
  c.mode = *mode;
  c.budget_seconds = a.budget_seconds;
  c.rng_seed = a.rng_seed;
  c.heuristic = *heuristic;
  c.bse_depth = a.bse_depth;
  c.import_interval = a.import_interval;
  c.sync_dir = a.sync_dir;
  c.stop_at_cost = a.stop_at_cost;
  c.fuzz_max_execs = a.max_execs;
  c.symexe_max_iterations = a.max_iterations;
  if (!a.seed_file.empty()) c.seed_input = read_file(a.seed_file);

  coordinator::CampaignStats stats;
  try {
    stats = coordinator::run_campaign(c, g_stop.get_token());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::cout << coordinator::format_report(stats);
  return stats.error ? kFailure : kOk;
}

int cmd_list() {
  for (const auto& s : subjects::list_subjects())
    fmt::print("{:<16} n={:<3} [{}..{}]  {:<12}  {}\n", s.name(), s.n, s.manifest.min_n, s.manifest.max_n,
               vm::to_string(s.manifest.cost_model), s.manifest.description);
  return kOk;
}

int cmd_replay(const std::string& name, std::optional<std::size_t> n, const std::string& input_path,
               const std::string& cost_model) {
  auto subject = subject_or_usage(name, n);
  auto model = cost_model_or(cost_model, subject.manifest.cost_model);
  auto input = read_file(input_path);
  auto result = vm::execute(subject.program, input, model);
  bool new_coverage = false;
  for (auto cell : result.bitmap->cells) new_coverage |= cell != 0;
  fmt::print("subject: {}\nn: {}\ncost_model: {}\nstatus: {}\ncost: {}\ninstructions: {}\nnew_coverage: {}\n",
             subject.name(), subject.n, vm::to_string(model), vm::to_string(result.status), result.cost,
             result.instructions, new_coverage);
  for (std::size_t i = 0; i < subject.program.counters.size(); ++i)
    fmt::print("counter.{}: {}\n", subject.program.counters[i], result.counters[i]);
  if (result.status == vm::Status::error) {
    fmt::print(stderr, "error: {}\n", result.fault);
    return kFailure;
  }
  return kOk;
}

int cmd_smt(const std::string& name, std::optional<std::size_t> n, const std::string& input_path, bool maximize) {
  auto subject = subject_or_usage(name, n);
  vm::Bytes input = input_path.empty() ? subject.seed_input : read_file(input_path);
  auto run = concolic::concolic_execute(subject.program, input, subject.manifest.cost_model);
  if (run.status == vm::Status::error) {
    fmt::print(stderr, "error: {}\n", run.execution.fault);
    return kFailure;
  }
  std::optional<solver::LinearExpr> objective;
  if (maximize) {
    if (!run.symbolic_cost) throw UsageError("--maximize needs a subject with a user-defined cost");
    objective = *run.symbolic_cost;
  }
  std::cout << solver::to_smtlib(run.path.conjuncts, concolic::path_domains(subject.program.input_layout, run.path),
                                 objective);
  return kOk;
}

int cmd_compare(const std::vector<std::string>& sources, const std::string& csv_out) {
  std::vector<fs::path> paths(sources.begin(), sources.end());
  auto report = cli::compare(paths);
  std::cout << cli::format_table(report);
  if (!csv_out.empty()) {
    std::ofstream out(csv_out);
    if (!out) throw std::runtime_error(fmt::format("{}: cannot write", csv_out));
    out << cli::curves_csv(report);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid worst-case fuzzing over a small VM"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a campaign");
  run_cmd->add_option("--mode", run.mode, "badger, kelinciwca, kelinci or symexe")->capture_default_str();
  run_cmd->add_option("--subject", run.subject)->required();
  run_cmd->add_option("--n", run.n, "Subject size");
  run_cmd->add_option("--cost-model", run.cost_model, "jumps, peak_alloc or user_defined");
  run_cmd->add_option("--budget-seconds", run.budget_seconds)->capture_default_str();
  run_cmd->add_option("--rng-seed", run.rng_seed)->capture_default_str();
  run_cmd->add_option("--heuristic", run.heuristic, "higher or lower")->capture_default_str();
  run_cmd->add_option("--bse-depth", run.bse_depth)->capture_default_str()->check(CLI::PositiveNumber);
  run_cmd->add_option("--import-interval", run.import_interval, "Symexe iterations between imports")
      ->capture_default_str();
  run_cmd->add_option("--sync-dir", run.sync_dir)->capture_default_str();
  run_cmd->add_option("--stop-at-cost", run.stop_at_cost);
  run_cmd->add_option("--max-execs", run.max_execs, "Fuzzer execution budget");
  run_cmd->add_option("--max-iterations", run.max_iterations, "Symexe iteration budget");
  run_cmd->add_option("--seed-file", run.seed_file);

  auto* list_cmd = app.add_subcommand("list", "List subjects");

  std::string subject, input, cost_model;
  std::optional<std::size_t> n;
  auto* replay_cmd = app.add_subcommand("replay", "Run one input and print its cost");
  replay_cmd->add_option("--subject", subject)->required();
  replay_cmd->add_option("--n", n);
  replay_cmd->add_option("--input", input)->required();
  replay_cmd->add_option("--cost-model", cost_model);

  bool maximize = false;
  auto* smt_cmd = app.add_subcommand("smt", "Print an input's path condition as SMT-LIB2");
  smt_cmd->add_option("--subject", subject)->required();
  smt_cmd->add_option("--n", n);
  smt_cmd->add_option("--input", input, "Defaults to the seed input");
  smt_cmd->add_flag("--maximize", maximize, "Add the symbolic user-defined cost as objective");

  std::vector<std::string> sources;
  std::string csv_out;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate campaign results");
  compare_cmd->add_option("sources", sources, "Campaign directories or stats CSV files")->required();
  compare_cmd->add_option("--csv", csv_out, "Write long-format curves here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*list_cmd) return cmd_list();
    if (*replay_cmd) return cmd_replay(subject, n, input, cost_model);
    if (*smt_cmd) return cmd_smt(subject, n, input, maximize);
    if (*compare_cmd) return cmd_compare(sources, csv_out);
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
  return kUsage;
}
