#include <atomic>
#include <cassert>

#include "mcct/kernels.hpp"
#include "variants.hpp"

namespace mcct::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<const Table*>& active_slot() noexcept {
  static std::atomic<const Table*> slot{&best_table()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

const Table* avx2_table() noexcept { return cpu_has_avx2() ? detail::avx2_variant() : nullptr; }

// NEON is mandatory on aarch64, so compile-time availability is enough.
const Table* neon_table() noexcept { return detail::neon_variant(); }

const Table& best_table() noexcept {
  static const Table* best = [] {
    if (const Table* t = avx2_table()) return t;
    if (const Table* t = neon_table()) return t;
    return &scalar_table();
  }();
  return *best;
}

const Table& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

bool select(Isa isa) noexcept {
  const Table* t = nullptr;
  switch (isa) {
    case Isa::Scalar:
      t = &scalar_table();
      break;
    case Isa::Avx2:
      t = avx2_table();
      break;
    case Isa::Neon:
      t = neon_table();
      break;
  }
  if (t == nullptr) return false;
  active_slot().store(t, std::memory_order_release);
  return true;
}

void affine(std::span<const double> s, std::span<const double> w, std::span<const double> b,
            std::span<double> out) {
  assert(w.size() == s.size() && b.size() == s.size() && out.size() == s.size());
  active().affine(s.data(), w.data(), b.data(), out.data(), s.size());
}

void inv_affine(std::span<const double> s, std::span<const double> w, std::span<const double> b,
                std::span<double> out) {
  assert(w.size() == s.size() && b.size() == s.size() && out.size() == s.size());
  active().inv_affine(s.data(), w.data(), b.data(), out.data(), s.size());
}

void scalar_affine(std::span<const double> s, double a, double b, std::span<double> out) {
  assert(out.size() == s.size());
  active().scalar_affine(s.data(), a, b, out.data(), s.size());
}

void accumulate_direct(std::span<const double> s, std::span<const double> r,
                       std::span<double> gw, std::span<double> gb) {
  assert(r.size() == s.size() && gw.size() == s.size() && gb.size() == s.size());
  active().accumulate_direct(s.data(), r.data(), gw.data(), gb.data(), s.size());
}

void accumulate_inverse(std::span<const double> s, std::span<const double> r,
                        std::span<const double> w, std::span<double> gw, std::span<double> gb) {
  assert(r.size() == s.size() && w.size() == s.size());
  assert(gw.size() == s.size() && gb.size() == s.size());
  active().accumulate_inverse(s.data(), r.data(), w.data(), gw.data(), gb.data(), s.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(y.size() == x.size());
  active().axpy(a, x.data(), y.data(), x.size());
}

void scale(double a, std::span<double> x) { active().scale(a, x.data(), x.size()); }

void mul(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  assert(y.size() == x.size() && out.size() == x.size());
  active().mul(x.data(), y.data(), out.data(), x.size());
}

}  // namespace mcct::kernels
