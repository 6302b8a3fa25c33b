// AArch64 Advanced SIMD variant; NEON is architecturally mandatory there.

#include <arm_neon.h>

#include <cmath>

#include "piw/kernels.hpp"

namespace piw::kernels {

namespace {

inline bool active_scalar(double prev, double cur, const ActivityParams& p) {
  const double rate = std::fabs((cur - prev) * p.inv_dt);
  return (rate > 0.0 && rate >= p.thr) || std::fabs(cur) >= p.delta_max;
}

inline uint64x2_t active_lanes(const double* d, std::size_t i, float64x2_t inv_dt,
                               float64x2_t thr, float64x2_t dmax) {
  const float64x2_t cur = vld1q_f64(d + i);
  const float64x2_t prev = vld1q_f64(d + i - 1);
  const float64x2_t rate = vabsq_f64(vmulq_f64(vsubq_f64(cur, prev), inv_dt));
  const uint64x2_t moving = vandq_u64(vcgeq_f64(rate, thr), vcgtq_f64(rate, vdupq_n_f64(0.0)));
  return vorrq_u64(moving, vcgeq_f64(vabsq_f64(cur), dmax));
}

void activity_flags_neon(const double* d, std::size_t n, const ActivityParams& p,
                         std::uint8_t* flags) {
  const float64x2_t inv_dt = vdupq_n_f64(p.inv_dt);
  const float64x2_t thr = vdupq_n_f64(p.thr);
  const float64x2_t dmax = vdupq_n_f64(p.delta_max);
  std::size_t i = 1;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t m = active_lanes(d, i, inv_dt, thr, dmax);
    flags[i - 1] = vgetq_lane_u64(m, 0) ? 1 : 0;
    flags[i] = vgetq_lane_u64(m, 1) ? 1 : 0;
  }
  for (; i < n; ++i) flags[i - 1] = active_scalar(d[i - 1], d[i], p) ? 1 : 0;
}

std::size_t active_count_neon(const double* d, std::size_t n, const ActivityParams& p) {
  const float64x2_t inv_dt = vdupq_n_f64(p.inv_dt);
  const float64x2_t thr = vdupq_n_f64(p.thr);
  const float64x2_t dmax = vdupq_n_f64(p.delta_max);
  uint64x2_t acc = vdupq_n_u64(0);
  std::size_t i = 1;
  for (; i + 2 <= n; i += 2) {
    acc = vsubq_u64(acc, active_lanes(d, i, inv_dt, thr, dmax));  // true lanes are all-ones (-1)
  }
  std::size_t count = vgetq_lane_u64(acc, 0) + vgetq_lane_u64(acc, 1);
  for (; i < n; ++i) count += active_scalar(d[i - 1], d[i], p) ? 1 : 0;
  return count;
}

double sum_sq_lag_diff_neon(const double* d, std::size_t n, std::size_t lag) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = lag;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(d + i), vld1q_f64(d + i - lag));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(d + i + 2), vld1q_f64(d + i + 2 - lag));
    acc0 = vaddq_f64(acc0, vmulq_f64(d0, d0));
    acc1 = vaddq_f64(acc1, vmulq_f64(d1, d1));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    const double diff = d[i] - d[i - lag];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{"neon", activity_flags_neon, active_count_neon,
                                 sum_sq_lag_diff_neon};
  return &table;
}

}  // namespace piw::kernels
