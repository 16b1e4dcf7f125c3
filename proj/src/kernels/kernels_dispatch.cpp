#include "qgs/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace qgs::kernels {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

const Kernels* g_active = nullptr;

const Kernels* probe() {
    const char* env = std::getenv("QGS_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &kScalar;
#if defined(__x86_64__) || defined(_M_X64)
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &kAvx2;
#endif
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) return &kAvx2;
#endif
    return &kScalar;
}

}  // namespace

const Kernels& active() {
    if (g_active == nullptr) g_active = probe();
    return *g_active;
}

bool set_active(const std::string& name) {
    if (name == "scalar") {
        g_active = &kScalar;
        return true;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && avx2_supported()) {
        g_active = &kAvx2;
        return true;
    }
#endif
    return false;
}

}  // namespace qgs::kernels
