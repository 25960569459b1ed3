#pragma once

#include "mcct/kernel_table.hpp"

namespace mcct::kernels::detail {

// Defined in the per-ISA translation units. Return nullptr when the variant
// was not compiled for this target.
const Table* avx2_variant() noexcept;
const Table* neon_variant() noexcept;

}  // namespace mcct::kernels::detail
