#include <atomic>
#include <cstdlib>
#include <string>

#include "piw/kernels.hpp"

namespace piw::kernels {

#ifndef PIW_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#ifndef PIW_HAVE_NEON
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* lookup(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "neon") return neon_table();
  return nullptr;
}

const KernelTable* detect() {
  if (const char* forced = std::getenv("PIW_SIMD")) {
    if (const auto* t = lookup(forced)) return t;
  }
  if (const auto* t = avx2_table()) return t;
  if (const auto* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  const auto* t = lookup(name);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace piw::kernels
