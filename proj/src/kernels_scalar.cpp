#include "ruler/kernels.hpp"

namespace ruler::kern::detail {

// Reference implementation. The 4-lane striping is not an optimisation here;
// it pins the summation order that the vector backends reproduce.
double dot_f32_scalar(const float* a, const float* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc[0] += static_cast<double>(a[i + 0]) * static_cast<double>(b[i + 0]);
        acc[1] += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        acc[2] += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        acc[3] += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    }
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        acc[lane] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((acc[0] + acc[1]) + acc[2]) + acc[3];
}

double dot_f64_scalar(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc[0] += a[i + 0] * b[i + 0];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    for (std::size_t lane = 0; i < n; ++i, ++lane)
        acc[lane] += a[i] * b[i];
    return ((acc[0] + acc[1]) + acc[2]) + acc[3];
}

void scale_f32_scalar(const float* src, float* dst, std::size_t n, double s) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = static_cast<float>(static_cast<double>(src[i]) * s);
}

}  // namespace ruler::kern::detail
