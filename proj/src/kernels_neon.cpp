#if defined(__aarch64__)

#include <arm_neon.h>

#include "ruler/kernels.hpp"

namespace ruler::kern::detail {

// Same striping as the scalar reference: lanes {0,1} live in acc01 and lanes
// {2,3} in acc23, reduced in the fixed ((0+1)+2)+3 order.
double dot_f32_neon(const float* a, const float* b, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t va = vld1q_f32(a + i);
        float32x4_t vb = vld1q_f32(b + i);
        float64x2_t lo = vmulq_f64(vcvt_f64_f32(vget_low_f32(va)),
                                   vcvt_f64_f32(vget_low_f32(vb)));
        float64x2_t hi = vmulq_f64(vcvt_f64_f32(vget_high_f32(va)),
                                   vcvt_f64_f32(vget_high_f32(vb)));
        acc01 = vaddq_f64(acc01, lo);
        acc23 = vaddq_f64(acc23, hi);
    }
    double lanes[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                       vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        lanes[lane] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

double dot_f64_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double lanes[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                       vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        lanes[lane] += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

void scale_f32_neon(const float* src, float* dst, std::size_t n, double s) {
    float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t v = vld1q_f32(src + i);
        float32x2_t lo = vcvt_f32_f64(vmulq_f64(vcvt_f64_f32(vget_low_f32(v)), vs));
        float32x2_t hi = vcvt_f32_f64(vmulq_f64(vcvt_f64_f32(vget_high_f32(v)), vs));
        vst1q_f32(dst + i, vcombine_f32(lo, hi));
    }
    for (; i < n; ++i)
        dst[i] = static_cast<float>(static_cast<double>(src[i]) * s);
}

}  // namespace ruler::kern::detail

#endif
