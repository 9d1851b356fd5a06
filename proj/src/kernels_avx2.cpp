#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "ruler/kernels.hpp"

namespace ruler::kern::detail {

// Mirrors the scalar reference exactly: widen 4 float32 lanes to float64,
// multiply (exact), add into 4 striped accumulators. No FMA, so each add
// rounds exactly like the scalar loop does.
double dot_f32_avx2(const float* a, const float* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        lanes[lane] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

double dot_f64_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        lanes[lane] += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

void scale_f32_avx2(const float* src, float* dst, std::size_t n, double s) {
    __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
        _mm_storeu_ps(dst + i, _mm256_cvtpd_ps(_mm256_mul_pd(v, vs)));
    }
    for (; i < n; ++i)
        dst[i] = static_cast<float>(static_cast<double>(src[i]) * s);
}

}  // namespace ruler::kern::detail

#endif
