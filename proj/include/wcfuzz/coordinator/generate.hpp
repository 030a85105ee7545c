#pragma once

#include <span>

#include "wcfuzz/solver/linear.hpp"
#include "wcfuzz/vm/program.hpp"

namespace wcfuzz::coordinator {

/// Encodes `model` per `layout`. Slots the model does not mention keep the
/// corresponding bytes of `fallback` (zero-padded to the layout length).
/// Throws std::out_of_range for values outside a slot's domain and
/// std::invalid_argument for variables beyond the layout.
vm::Bytes generate_input_file(const solver::Assignment& model, const vm::InputLayout& layout,
                              std::span<const std::uint8_t> fallback);

}  // namespace wcfuzz::coordinator
