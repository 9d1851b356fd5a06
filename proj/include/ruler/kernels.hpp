#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops behind the similarity metrics and the trainer.
//
// Accumulation contract: float32 inputs are widened to float64 and summed in
// four accumulators striped over positions (i mod 4 within each 4-block), then
// reduced as ((acc0 + acc1) + acc2) + acc3. Products of two widened float32
// values are exact in float64, so the only rounding happens in the adds, and
// every backend performs the same adds in the same order. Results are
// therefore bitwise identical across scalar, AVX2 and NEON paths, which the
// test suite asserts rather than assumes.
namespace ruler::kern {

enum class Backend { scalar, avx2, neon };

// Highest backend the running CPU supports.
Backend detect_backend();

// Currently active backend.
Backend active_backend();
std::string_view backend_name();

// Force a specific backend (tests, debugging). Throws OutOfRange if the CPU
// cannot run it. The RULER_KERNEL environment variable ("scalar", "avx2",
// "neon") applies the same override at startup.
void force_backend(Backend b);

// dot(a, b) over n float32 values, accumulated in float64.
double dot_f32(const float* a, const float* b, std::size_t n);

// dot(a, b) over n float64 values, 4-lane striped like dot_f32.
double dot_f64(const double* a, const double* b, std::size_t n);

// dst[i] = float32(float64(src[i]) * s). Used by row normalisation.
void scale_f32(const float* src, float* dst, std::size_t n, double s);

namespace detail {
double dot_f32_scalar(const float* a, const float* b, std::size_t n);
double dot_f64_scalar(const double* a, const double* b, std::size_t n);
void scale_f32_scalar(const float* src, float* dst, std::size_t n, double s);
#if defined(__x86_64__) || defined(_M_X64)
double dot_f32_avx2(const float* a, const float* b, std::size_t n);
double dot_f64_avx2(const double* a, const double* b, std::size_t n);
void scale_f32_avx2(const float* src, float* dst, std::size_t n, double s);
#endif
#if defined(__aarch64__)
double dot_f32_neon(const float* a, const float* b, std::size_t n);
double dot_f64_neon(const double* a, const double* b, std::size_t n);
void scale_f32_neon(const float* src, float* dst, std::size_t n, double s);
#endif
}  // namespace detail

}  // namespace ruler::kern
