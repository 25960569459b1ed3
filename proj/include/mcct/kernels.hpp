#pragma once

// Data-parallel inner loops shared by the calibrators.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant picked at runtime.
// The vector variants are required to be bitwise identical to the scalar
// reference: elementwise kernels use the same operation order and never fuse
// multiply-add, and reductions use a fixed four-lane accumulation order that
// the scalar code reproduces exactly.

#include <cstddef>
#include <span>
#include <string_view>

#include "mcct/kernel_table.hpp"

namespace mcct::kernels {

std::string_view isa_name(Isa isa) noexcept;

const Table& scalar_table() noexcept;
/// nullptr when the variant is not compiled in or not supported by this CPU.
const Table* avx2_table() noexcept;
const Table* neon_table() noexcept;

/// Best table supported by the running CPU.
const Table& best_table() noexcept;

/// Currently active table (defaults to best_table()).
const Table& active() noexcept;

/// Force a particular ISA. Returns false (and leaves the selection unchanged)
/// when that ISA is unavailable.
bool select(Isa isa) noexcept;

// Span front-ends over the active table.

inline double max(std::span<const double> x) { return active().max(x.data(), x.size()); }
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

void affine(std::span<const double> s, std::span<const double> w, std::span<const double> b,
            std::span<double> out);
void inv_affine(std::span<const double> s, std::span<const double> w, std::span<const double> b,
                std::span<double> out);
void scalar_affine(std::span<const double> s, double a, double b, std::span<double> out);
void accumulate_direct(std::span<const double> s, std::span<const double> r,
                       std::span<double> gw, std::span<double> gb);
void accumulate_inverse(std::span<const double> s, std::span<const double> r,
                        std::span<const double> w, std::span<double> gw, std::span<double> gb);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void mul(std::span<const double> x, std::span<const double> y, std::span<double> out);

}  // namespace mcct::kernels
