#include "wcfuzz/coordinator/generate.hpp"

#include <algorithm>
#include <stdexcept>

namespace wcfuzz::coordinator {

vm::Bytes generate_input_file(const solver::Assignment& model, const vm::InputLayout& layout,
                              std::span<const std::uint8_t> fallback) {
  vm::Bytes out(fallback.begin(), fallback.end());
  if (out.size() < layout.byte_length()) out.resize(layout.byte_length(), 0);
  if (model.empty()) return out;
  auto values = layout.decode(out);
  for (const auto& [var, value] : model) {
    if (var >= values.size())
      throw std::invalid_argument("model assigns s" + std::to_string(var) + " but the layout has " +
                                  std::to_string(values.size()) + " values");
    values[var] = value;
  }
  auto encoded = layout.encode(values);
  for (const auto& [var, value] : model) {
    auto [offset, width] = layout.byte_span(var);
    std::copy_n(encoded.begin() + static_cast<std::ptrdiff_t>(offset), width,
                out.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return out;
}

}  // namespace wcfuzz::coordinator
