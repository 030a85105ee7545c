#pragma once

#include <string_view>
#include <vector>

namespace wcfuzz::subjects::detail {

struct EmbeddedSubject {
  std::string_view name;
  std::string_view program;
  std::string_view manifest;
};

const std::vector<EmbeddedSubject>& embedded_subjects();

}  // namespace wcfuzz::subjects::detail
