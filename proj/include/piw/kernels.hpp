#pragma once

// Inner loops of the stick metrics. Each kernel has a scalar reference
// implementation and optional vector variants; the active table is chosen
// once at startup from CPU features (override with PIW_SIMD=scalar|avx2|neon).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace piw::kernels {

struct ActivityParams {
  double inv_dt = 100.0;
  double thr = 0.0;        // rate threshold, deflection units per second
  double delta_max = 1.0;  // saturation deflection
};

struct KernelTable {
  std::string_view name;

  /// flags[i - 1] = 1 iff rate = |(d[i] - d[i-1]) * inv_dt| is nonzero and >= thr,
  /// or |d[i]| >= delta_max,
  /// for i = 1..n-1. `flags` must hold n - 1 entries.
  void (*activity_flags)(const double* d, std::size_t n, const ActivityParams& p,
                         std::uint8_t* flags);

  /// Number of set flags that activity_flags would produce.
  std::size_t (*active_count)(const double* d, std::size_t n, const ActivityParams& p);

  /// Sum over i = lag..n-1 of (d[i] - d[i-lag])^2.
  double (*sum_sq_lag_diff)(const double* d, std::size_t n, std::size_t lag);
};

const KernelTable& scalar_table();
/// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// The table used by piwcore.
const KernelTable& active();

/// Force a specific table (tests, benchmarks). Returns false if unavailable.
bool select(std::string_view name);

}  // namespace piw::kernels
