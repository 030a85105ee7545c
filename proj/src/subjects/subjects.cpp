#include "wcfuzz/subjects/subjects.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "embedded.hpp"

namespace wcfuzz::subjects {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::int64_t to_integer(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("invalid integer '" + std::string(s) + "' in " + std::string(what));
  return v;
}

const detail::EmbeddedSubject& find_embedded(std::string_view name) {
  for (const auto& s : detail::embedded_subjects())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown subject '" + std::string(name) + "'");
}

}  // namespace

Manifest parse_manifest(std::string_view text) {
  std::map<std::string, std::string, std::less<>> values;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    auto hash = line.find('#');
    bool quoted_hash = hash != std::string_view::npos && line.find('"') < hash;
    if (hash != std::string_view::npos && !quoted_hash) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"') {
      auto close = value.find('"', 1);
      if (close == std::string_view::npos || trim(value.substr(close + 1)).size() != 0)
        throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": bad string");
      value = value.substr(1, close - 1);
    }
    if (!values.emplace(key, std::string(value)).second)
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": duplicate key " + key);
  }

  auto take = [&](std::string_view key) -> std::optional<std::string> {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    std::string v = it->second;
    values.erase(it);
    return v;
  };
  auto require = [&](std::string_view key) {
    auto v = take(key);
    if (!v) throw std::invalid_argument("manifest is missing '" + std::string(key) + "'");
    return *v;
  };

  Manifest m;
  m.name = require("name");
  m.description = take("description").value_or("");
  m.default_n = static_cast<std::size_t>(to_integer(require("default_n"), "default_n"));
  m.min_n = static_cast<std::size_t>(to_integer(take("min_n").value_or("1"), "min_n"));
  m.max_n = static_cast<std::size_t>(
      to_integer(take("max_n").value_or(std::to_string(m.default_n)), "max_n"));
  auto model = vm::parse_cost_model(require("cost_model"));
  if (!model) throw std::invalid_argument("manifest has an unknown cost_model");
  m.cost_model = *model;
  m.collision_counter = take("collision_counter");
  m.oracle = take("oracle");
  if (!values.empty()) throw std::invalid_argument("manifest has unknown key '" + values.begin()->first + "'");
  if (m.min_n < 1 || m.min_n > m.default_n || m.default_n > m.max_n)
    throw std::invalid_argument("manifest needs 1 <= min_n <= default_n <= max_n");
  return m;
}

std::string instantiate(std::string_view program_template, std::size_t n) {
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    auto open = program_template.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = program_template.find("}}", open);
    if (close == std::string_view::npos) throw std::invalid_argument("unterminated {{ in subject template");
    out.append(program_template.substr(pos, open - pos));
    std::string_view expr = trim(program_template.substr(open + 2, close - open - 2));
    if (expr.empty() || expr.front() != 'N')
      throw std::invalid_argument("template expressions must start with N");
    expr.remove_prefix(1);
    std::int64_t value = static_cast<std::int64_t>(n);
    if (!expr.empty() && expr.front() == '*') {
      expr.remove_prefix(1);
      auto end = expr.find_first_of("+-");
      value *= to_integer(expr.substr(0, end), "template");
      expr = end == std::string_view::npos ? std::string_view{} : expr.substr(end);
    }
    if (!expr.empty()) {
      bool minus = expr.front() == '-';
      if (!minus && expr.front() != '+') throw std::invalid_argument("bad template expression");
      std::int64_t c = to_integer(expr.substr(1), "template");
      value += minus ? -c : c;
    }
    out += std::to_string(value);
    pos = close + 2;
  }
  out.append(program_template.substr(pos));
  return out;
}

std::optional<std::size_t> SubjectSpec::collision_counter_index() const {
  if (!manifest.collision_counter) return std::nullopt;
  const auto& names = program.counters;
  auto it = std::find(names.begin(), names.end(), *manifest.collision_counter);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

vm::Bytes hello_world_seed(std::size_t length) {
  static constexpr std::string_view kText = "Hello World";
  vm::Bytes out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = static_cast<std::uint8_t>(kText[i % kText.size()]);
  return out;
}

std::vector<std::string> subject_names() {
  std::vector<std::string> names;
  for (const auto& s : detail::embedded_subjects()) names.emplace_back(s.name);
  std::sort(names.begin(), names.end());
  return names;
}

SubjectSpec load_subject(std::string_view name, std::optional<std::size_t> n, std::uint64_t id_seed) {
  const auto& embedded = find_embedded(name);
  SubjectSpec spec;
  spec.manifest = parse_manifest(embedded.manifest);
  spec.n = n.value_or(spec.manifest.default_n);
  if (spec.n < spec.manifest.min_n || spec.n > spec.manifest.max_n)
    throw std::invalid_argument("n=" + std::to_string(spec.n) + " outside [" +
                                std::to_string(spec.manifest.min_n) + ", " +
                                std::to_string(spec.manifest.max_n) + "] for " + spec.manifest.name);
  spec.program = vm::load_program(instantiate(embedded.program, spec.n), id_seed);
  spec.seed_input = hello_world_seed(spec.program.input_layout.byte_length());
  return spec;
}

std::vector<SubjectSpec> list_subjects() {
  std::vector<SubjectSpec> out;
  for (const auto& name : subject_names()) out.push_back(load_subject(name));
  return out;
}

}  // namespace wcfuzz::subjects
