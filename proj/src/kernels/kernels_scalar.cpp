#include <cmath>

#include "piw/kernels.hpp"

namespace piw::kernels {

namespace {

inline bool is_active(double prev, double cur, const ActivityParams& p) {
  const double rate = std::fabs((cur - prev) * p.inv_dt);
  return (rate > 0.0 && rate >= p.thr) || std::fabs(cur) >= p.delta_max;
}

void activity_flags_scalar(const double* d, std::size_t n, const ActivityParams& p,
                           std::uint8_t* flags) {
  for (std::size_t i = 1; i < n; ++i) flags[i - 1] = is_active(d[i - 1], d[i], p) ? 1 : 0;
}

std::size_t active_count_scalar(const double* d, std::size_t n, const ActivityParams& p) {
  std::size_t count = 0;
  for (std::size_t i = 1; i < n; ++i) count += is_active(d[i - 1], d[i], p) ? 1 : 0;
  return count;
}

double sum_sq_lag_diff_scalar(const double* d, std::size_t n, std::size_t lag) {
  double sum = 0.0;
  for (std::size_t i = lag; i < n; ++i) {
    const double diff = d[i] - d[i - lag];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", activity_flags_scalar, active_count_scalar,
                                 sum_sq_lag_diff_scalar};
  return table;
}

}  // namespace piw::kernels
