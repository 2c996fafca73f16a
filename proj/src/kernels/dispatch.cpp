#include "banet/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace banet {

#if defined(BANET_BUILD_AVX2)
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#if defined(BANET_BUILD_AVX2)
    static const KernelTable* t =
        (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
            ? avx2_kernels_impl()
            : nullptr;
    return t;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable* chosen = [] {
        const char* det = std::getenv("BANET_DETERMINISTIC");
        if (det && det[0] == '1') return &scalar_kernels();
        const char* env = std::getenv("BANET_KERNELS");
        if (env && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
        if (env && std::strcmp(env, "avx2") == 0 && avx2_kernels()) return avx2_kernels();
        return avx2_kernels() ? avx2_kernels() : &scalar_kernels();
    }();
    return *chosen;
}

} // namespace banet
