#include "wcfuzz/fuzzer/fuzzer.hpp"

#include <algorithm>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <spdlog/spdlog.h>
#include <stdexcept>
#include <system_error>

namespace wcfuzz::fuzzer {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::int8_t, 9> kInteresting8 = {-128, -1, 0, 1, 16, 32, 64, 100, 127};

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

void havoc_edit(vm::Bytes& b, std::mt19937_64& rng) {
  const std::size_t n = b.size();
  switch (below(rng, 8)) {
    case 0:
      b[below(rng, n)] ^= static_cast<std::uint8_t>(1u << below(rng, 8));
      break;
    case 1:
      b[below(rng, n)] = static_cast<std::uint8_t>(kInteresting8[below(rng, kInteresting8.size())]);
      break;
    case 2:
      b[below(rng, n)] = static_cast<std::uint8_t>(below(rng, 256));
      break;
    case 3:
      b[below(rng, n)] += static_cast<std::uint8_t>(1 + below(rng, kArithMax));
      break;
    case 4:
      b[below(rng, n)] -= static_cast<std::uint8_t>(1 + below(rng, kArithMax));
      break;
    case 5: {  // overwrite with a copy of another block
      std::size_t len = 1 + below(rng, n);
      std::size_t from = below(rng, n - len + 1), to = below(rng, n - len + 1);
      std::copy_n(vm::Bytes(b.begin() + from, b.begin() + from + len).begin(), len, b.begin() + to);
      break;
    }
    case 6: {  // remove a block; the tail refills from the front
      std::size_t len = 1 + below(rng, n);
      std::size_t at = below(rng, n - len + 1);
      vm::Bytes removed(b.begin() + at, b.begin() + at + len);
      b.erase(b.begin() + at, b.begin() + at + len);
      b.insert(b.end(), removed.begin(), removed.end());
      break;
    }
    default: {  // insert a cloned block; the tail falls off
      std::size_t len = 1 + below(rng, n);
      std::size_t from = below(rng, n - len + 1), at = below(rng, n);
      vm::Bytes block(b.begin() + from, b.begin() + from + len);
      b.insert(b.begin() + at, block.begin(), block.end());
      b.resize(n);
      break;
    }
  }
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::kelinci ? "kelinci" : "kelinciwca"; }

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "kelinci") return Mode::kelinci;
  if (text == "kelinciwca") return Mode::kelinciwca;
  return std::nullopt;
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::seed: return "seed";
    case Origin::mutation: return "mutation";
    case Origin::import: return "import";
  }
  return "?";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::bitflip: return "bitflip";
    case Stage::arith: return "arith";
    case Stage::interest: return "interest";
    case Stage::havoc: return "havoc";
  }
  return "?";
}

std::uint8_t bucket_bit(std::uint8_t hits) {
  if (hits == 0) return 0;
  if (hits <= 3) return static_cast<std::uint8_t>(1u << (hits - 1));
  if (hits <= 7) return 1u << 3;
  if (hits <= 15) return 1u << 4;
  if (hits <= 31) return 1u << 5;
  if (hits <= 127) return 1u << 6;
  return 1u << 7;
}

bool classify_coverage(const vm::Bitmap& bitmap, CoverageSet& global) {
  static const auto table = [] {
    std::array<std::uint8_t, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = bucket_bit(static_cast<std::uint8_t>(i));
    return t;
  }();
  bool is_new = false;
  const auto* cells = bitmap.cells.data();
  auto* seen = global.seen.data();
  for (std::size_t i = 0; i < vm::kMapSize; i += 8) {
    std::uint64_t word;
    std::memcpy(&word, cells + i, 8);
    if (word == 0) continue;
    for (std::size_t j = i; j < i + 8; ++j) {
      std::uint8_t bit = table[cells[j]];
      if (bit & ~seen[j]) {
        seen[j] |= bit;
        is_new = true;
      }
    }
  }
  return is_new;
}

bool Highscore::offer(double elapsed_s, std::uint64_t cost, const vm::Bytes& input) {
  if (!history.empty() && cost <= best_cost) return false;
  best_cost = cost;
  best_input = input;
  if (!history.empty() && elapsed_s <= history.back().first)
    history.back().second = cost;
  else
    history.emplace_back(elapsed_s, cost);
  return true;
}

std::vector<vm::Bytes> mutate(const QueueEntry& entry, std::mt19937_64& rng, Stage stage,
                              std::size_t havoc_candidates) {
  const vm::Bytes& in = entry.input;
  if (in.empty()) throw std::invalid_argument("cannot mutate an empty input");
  std::vector<vm::Bytes> out;
  switch (stage) {
    case Stage::bitflip:
      out.reserve(in.size() * 8);
      for (std::size_t i = 0; i < in.size(); ++i)
        for (int bit = 7; bit >= 0; --bit) {
          out.push_back(in);
          out.back()[i] ^= static_cast<std::uint8_t>(1u << bit);
        }
      break;
    case Stage::arith:
      out.reserve(in.size() * 2 * kArithMax);
      for (std::size_t i = 0; i < in.size(); ++i)
        for (int d = 1; d <= kArithMax; ++d) {
          out.push_back(in);
          out.back()[i] = static_cast<std::uint8_t>(in[i] + d);
          out.push_back(in);
          out.back()[i] = static_cast<std::uint8_t>(in[i] - d);
        }
      break;
    case Stage::interest:
      for (std::size_t i = 0; i < in.size(); ++i)
        for (auto v : kInteresting8) {
          if (in[i] == static_cast<std::uint8_t>(v)) continue;
          out.push_back(in);
          out.back()[i] = static_cast<std::uint8_t>(v);
        }
      break;
    case Stage::havoc:
      out.reserve(havoc_candidates);
      for (std::size_t k = 0; k < havoc_candidates; ++k) {
        vm::Bytes b = in;
        std::size_t edits = std::size_t{1} << below(rng, 7);
        for (std::size_t e = 0; e < edits; ++e) havoc_edit(b, rng);
        out.push_back(std::move(b));
      }
      break;
  }
  return out;
}

const QueueEntry& select_ancestor(std::span<const QueueEntry> queue, Mode mode, std::mt19937_64& rng) {
  if (queue.empty()) throw std::invalid_argument("empty queue");
  if (mode == Mode::kelinci) return queue[below(rng, queue.size())];
  std::vector<double> weights;
  weights.reserve(queue.size());
  for (const auto& e : queue) weights.push_back(1.0 + static_cast<double>(e.cost));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return queue[pick(rng)];
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> data) {
  fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw fs::filesystem_error("cannot open for writing", tmp, std::make_error_code(std::errc::io_error));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw fs::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string queue_file_name(std::size_t id) { return fmt::format("id_{:06d}", id); }

std::string history_csv(const std::vector<std::pair<double, std::uint64_t>>& history,
                        std::string_view value_column) {
  std::string out = fmt::format("elapsed_s,{}\n", value_column);
  for (const auto& [t, c] : history) out += fmt::format("{:.3f},{}\n", t, c);
  return out;
}

std::vector<std::pair<fs::path, vm::Bytes>> PeerScanner::poll() {
  std::vector<fs::path> peers;
  std::error_code ec;
  for (const auto& d : fs::directory_iterator(sync_dir_, ec)) {
    if (!d.is_directory() || d.path().filename() == own_id_) continue;
    if (fs::is_directory(d.path() / "queue")) peers.push_back(d.path());
  }
  if (ec) throw fs::filesystem_error("cannot scan sync directory", sync_dir_, ec);
  std::sort(peers.begin(), peers.end());
  std::vector<std::pair<fs::path, vm::Bytes>> out;
  for (const auto& peer : peers) {
    auto& seen = seen_[peer.filename().string()];
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(peer / "queue")) {
      auto name = f.path().filename().string();
      if (!f.is_regular_file() || name.starts_with('.') || seen.contains(name)) continue;
      files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (auto& path : files) {
      seen.insert(path.filename().string());
      std::ifstream in(path, std::ios::binary);
      vm::Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      out.emplace_back(std::move(path), std::move(data));
    }
  }
  return out;
}

bool PeerScanner::has_peers() const {
  std::error_code ec;
  for (const auto& d : fs::directory_iterator(sync_dir_, ec))
    if (d.is_directory() && d.path().filename() != own_id_ && fs::is_directory(d.path() / "queue")) return true;
  return false;
}

namespace {

class Loop {
 public:
  Loop(const FuzzConfig& config, std::stop_token stop, std::optional<std::size_t> collision_counter)
      : cfg_(config),
        stop_(std::move(stop)),
        collision_counter_(collision_counter),
        interp_(*config.program, config.cost_model, config.instruction_budget),
        rng_(config.rng_seed),
        epoch_(config.epoch.value_or(std::chrono::steady_clock::now())),
        bitmap_(std::make_unique<vm::Bitmap>()),
        coverage_(std::make_unique<CoverageSet>()),
        peers_(config.sync_dir, config.instance_id) {}

  FuzzReport run() {
    if (!cfg_.program) throw std::invalid_argument("fuzz_loop needs a program");
    own_dir_ = cfg_.sync_dir / cfg_.instance_id;
    fs::create_directories(own_dir_ / "queue");
    last_flush_ = elapsed();

    vm::Bytes seed = cfg_.seed_input;
    if (seed.size() < cfg_.program->input_layout.byte_length())
      throw std::invalid_argument("seed input is shorter than the input layout");
    seed.resize(cfg_.program->input_layout.byte_length());
    if (seed.empty()) throw std::invalid_argument("program reads no input");
    evaluate(seed, Origin::seed);

    while (!done()) {
      std::size_t index = pick_index();
      if (!report_.queue[index].deterministic_done) {
        report_.queue[index].deterministic_done = true;
        for (Stage s : {Stage::bitflip, Stage::arith, Stage::interest})
          if (!run_all(mutate(report_.queue[index], rng_, s), Origin::mutation)) break;
        if (done()) break;
      }
      auto candidates = mutate(report_.queue[index], rng_, Stage::havoc, cfg_.havoc_candidates);
      run_all(candidates, Origin::mutation);
      ++report_.havoc_cycles;
      if (cfg_.sync_every && report_.havoc_cycles % cfg_.sync_every == 0 && !done()) sync_import();
    }
    flush();
    return std::move(report_);
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
  }

  bool done() {
    if (stop_.stop_requested()) return true;
    if (cfg_.max_execs && report_.execs >= cfg_.max_execs) return true;
    if (cfg_.stop_at_cost && !report_.highscore.empty() && report_.highscore.best_cost >= *cfg_.stop_at_cost)
      return true;
    double now = elapsed();
    if (now - last_flush_ >= cfg_.stats_flush_seconds) flush();
    return cfg_.budget_seconds > 0 && now >= cfg_.budget_seconds;
  }

  std::size_t pick_index() {
    const QueueEntry& e = select_ancestor(report_.queue, cfg_.mode, rng_);
    return static_cast<std::size_t>(&e - report_.queue.data());
  }

  bool run_all(const std::vector<vm::Bytes>& candidates, Origin origin) {
    for (const auto& c : candidates) {
      if (done()) return false;
      evaluate(c, origin);
    }
    return true;
  }

  /// Executes one input and admits it when interesting. Returns whether it
  /// was admitted.
  bool evaluate(const vm::Bytes& input, Origin origin) {
    auto summary = interp_.run(input, bitmap_.get());
    ++report_.execs;
    if (collision_counter_) {
      auto counters = interp_.counters();
      if (*collision_counter_ < counters.size())
        report_.max_collisions = std::max(report_.max_collisions, counters[*collision_counter_]);
    }
    if (summary.status == vm::Status::error) {
      ++report_.errors;
      return false;
    }
    if (summary.status == vm::Status::timeout) ++report_.timeouts;

    bool coverage_new = classify_coverage(*bitmap_, *coverage_);
    std::uint64_t before = report_.highscore.best_cost;
    bool first = report_.highscore.empty();
    bool high = report_.highscore.offer(elapsed(), summary.cost, input) && !first;
    bool admit = origin == Origin::seed || coverage_new || (cfg_.mode == Mode::kelinciwca && high);
    if (!admit) return false;

    QueueEntry e;
    e.id = report_.queue.size();
    e.input = input;
    e.cost = summary.cost;
    e.coverage_new = coverage_new;
    e.highscore_new = high;
    e.highscore_at_admission = before;
    e.origin = origin;
    if (origin != Origin::import) write_file_atomic(own_dir_ / "queue" / queue_file_name(e.id), e.input);
    report_.queue.push_back(std::move(e));
    return true;
  }

  void sync_import() {
    for (auto& [path, data] : peers_.poll()) {
      if (data.size() < cfg_.program->input_layout.byte_length()) continue;
      data.resize(cfg_.program->input_layout.byte_length());
      if (evaluate(data, Origin::import)) ++report_.imported;
      if (done()) return;
    }
  }

  void flush() {
    last_flush_ = elapsed();
    write_file_atomic(own_dir_ / "stats.csv", history_csv(report_.highscore.history));
    write_file_atomic(own_dir_ / "highscore", fmt::format("{}\n", report_.highscore.best_cost));
  }

  const FuzzConfig& cfg_;
  std::stop_token stop_;
  std::optional<std::size_t> collision_counter_;
  vm::Interpreter interp_;
  std::mt19937_64 rng_;
  std::chrono::steady_clock::time_point epoch_;
  std::unique_ptr<vm::Bitmap> bitmap_;
  std::unique_ptr<CoverageSet> coverage_;
  fs::path own_dir_;
  double last_flush_ = 0;
  PeerScanner peers_;
  FuzzReport report_;
};

}  // namespace

FuzzReport fuzz_loop(const FuzzConfig& config, std::stop_token stop, std::optional<std::size_t> collision_counter) {
  return Loop(config, std::move(stop), collision_counter).run();
}

}  // namespace wcfuzz::fuzzer
