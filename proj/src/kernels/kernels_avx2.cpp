// Compiled with -mavx2; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "piw/kernels.hpp"

namespace piw::kernels {

namespace {

// 4-bit lane mask of active intervals for d[i..i+3] against d[i-1..i+2].
inline int active_mask(const double* d, std::size_t i, __m256d inv_dt, __m256d thr,
                       __m256d dmax) {
  const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  const __m256d cur = _mm256_loadu_pd(d + i);
  const __m256d prev = _mm256_loadu_pd(d + i - 1);
  const __m256d rate = _mm256_and_pd(_mm256_mul_pd(_mm256_sub_pd(cur, prev), inv_dt), kAbsMask);
  const __m256d moving = _mm256_and_pd(_mm256_cmp_pd(rate, thr, _CMP_GE_OQ),
                                       _mm256_cmp_pd(rate, _mm256_setzero_pd(), _CMP_GT_OQ));
  const __m256d saturated = _mm256_cmp_pd(_mm256_and_pd(cur, kAbsMask), dmax, _CMP_GE_OQ);
  return _mm256_movemask_pd(_mm256_or_pd(moving, saturated));
}

inline bool active_scalar(double prev, double cur, const ActivityParams& p) {
  const double rate = std::fabs((cur - prev) * p.inv_dt);
  return (rate > 0.0 && rate >= p.thr) || std::fabs(cur) >= p.delta_max;
}

void activity_flags_avx2(const double* d, std::size_t n, const ActivityParams& p,
                         std::uint8_t* flags) {
  const __m256d inv_dt = _mm256_set1_pd(p.inv_dt);
  const __m256d thr = _mm256_set1_pd(p.thr);
  const __m256d dmax = _mm256_set1_pd(p.delta_max);
  std::size_t i = 1;
  for (; i + 4 <= n; i += 4) {
    const int mask = active_mask(d, i, inv_dt, thr, dmax);
    flags[i - 1] = mask & 1;
    flags[i] = (mask >> 1) & 1;
    flags[i + 1] = (mask >> 2) & 1;
    flags[i + 2] = (mask >> 3) & 1;
  }
  for (; i < n; ++i) flags[i - 1] = active_scalar(d[i - 1], d[i], p) ? 1 : 0;
}

std::size_t active_count_avx2(const double* d, std::size_t n, const ActivityParams& p) {
  const __m256d inv_dt = _mm256_set1_pd(p.inv_dt);
  const __m256d thr = _mm256_set1_pd(p.thr);
  const __m256d dmax = _mm256_set1_pd(p.delta_max);
  std::size_t count = 0;
  std::size_t i = 1;
  for (; i + 4 <= n; i += 4) {
    count += static_cast<std::size_t>(__builtin_popcount(active_mask(d, i, inv_dt, thr, dmax)));
  }
  for (; i < n; ++i) count += active_scalar(d[i - 1], d[i], p) ? 1 : 0;
  return count;
}

double sum_sq_lag_diff_avx2(const double* d, std::size_t n, std::size_t lag) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = lag;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(d + i), _mm256_loadu_pd(d + i - lag));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(d + i + 4), _mm256_loadu_pd(d + i + 4 - lag));
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(d0, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(d1, d1));
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double sum = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) {
    const double diff = d[i] - d[i - lag];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", activity_flags_avx2, active_count_avx2,
                                 sum_sq_lag_diff_avx2};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace piw::kernels
