#include "ruler/kernels.hpp"

#include <cstdlib>
#include <string>

#include "ruler/errors.hpp"

namespace ruler::kern {

namespace {

using DotF32 = double (*)(const float*, const float*, std::size_t);
using DotF64 = double (*)(const double*, const double*, std::size_t);
using ScaleF32 = void (*)(const float*, float*, std::size_t, double);

struct Dispatch {
    Backend backend;
    DotF32 dot32;
    DotF64 dot64;
    ScaleF32 scale32;
};

Dispatch make_dispatch(Backend b) {
    switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::avx2:
            return {Backend::avx2, detail::dot_f32_avx2, detail::dot_f64_avx2,
                    detail::scale_f32_avx2};
#endif
#if defined(__aarch64__)
        case Backend::neon:
            return {Backend::neon, detail::dot_f32_neon, detail::dot_f64_neon,
                    detail::scale_f32_neon};
#endif
        default:
            return {Backend::scalar, detail::dot_f32_scalar, detail::dot_f64_scalar,
                    detail::scale_f32_scalar};
    }
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Dispatch initial_dispatch() {
    Backend b = detect_backend();
    if (const char* env = std::getenv("RULER_KERNEL")) {
        std::string want(env);
        Backend forced = b;
        if (want == "scalar") forced = Backend::scalar;
        else if (want == "avx2") forced = Backend::avx2;
        else if (want == "neon") forced = Backend::neon;
        if (backend_available(forced)) b = forced;
    }
    return make_dispatch(b);
}

Dispatch& dispatch() {
    static Dispatch d = initial_dispatch();
    return d;
}

}  // namespace

Backend detect_backend() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#endif
#if defined(__aarch64__)
    return Backend::neon;
#endif
    return Backend::scalar;
}

Backend active_backend() { return dispatch().backend; }

std::string_view backend_name() {
    switch (dispatch().backend) {
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
        default: return "scalar";
    }
}

void force_backend(Backend b) {
    if (!backend_available(b))
        throw OutOfRange("requested kernel backend is not available on this CPU");
    dispatch() = make_dispatch(b);
}

double dot_f32(const float* a, const float* b, std::size_t n) {
    return dispatch().dot32(a, b, n);
}

double dot_f64(const double* a, const double* b, std::size_t n) {
    return dispatch().dot64(a, b, n);
}

void scale_f32(const float* src, float* dst, std::size_t n, double s) {
    dispatch().scale32(src, dst, n, s);
}

}  // namespace ruler::kern
