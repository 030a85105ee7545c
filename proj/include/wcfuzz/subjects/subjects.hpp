#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wcfuzz/vm/execution.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::subjects {

/// Parsed `subject.toml`: flat `key = value` lines, string values quoted,
/// integer values bare, `#` comments.
struct Manifest {
  std::string name;
  std::string description;
  std::size_t default_n = 1;
  std::size_t min_n = 1;
  std::size_t max_n = 1;
  vm::CostModel cost_model = vm::CostModel::jumps;
  std::optional<std::string> collision_counter;
  std::optional<std::string> oracle;
};

Manifest parse_manifest(std::string_view text);

/// Replaces `{{N}}`, `{{N*k}}`, `{{N+c}}`, `{{N-c}}` and `{{N*k+c}}` with
/// the evaluated integer.
std::string instantiate(std::string_view program_template, std::size_t n);

struct SubjectSpec {
  Manifest manifest;
  vm::Program program;
  std::size_t n = 0;
  vm::Bytes seed_input;

  const std::string& name() const { return manifest.name; }
  /// Index of the collision counter in program.counters, if the subject has one.
  std::optional<std::size_t> collision_counter_index() const;
};

/// ASCII "Hello World", repeated or truncated to `length` bytes.
vm::Bytes hello_world_seed(std::size_t length);

std::vector<std::string> subject_names();

/// Throws std::invalid_argument for unknown names or n outside the
/// manifest's [min_n, max_n].
SubjectSpec load_subject(std::string_view name, std::optional<std::size_t> n = std::nullopt,
                         std::uint64_t id_seed = 0);

/// Every shipped subject at its default size.
std::vector<SubjectSpec> list_subjects();

}  // namespace wcfuzz::subjects
