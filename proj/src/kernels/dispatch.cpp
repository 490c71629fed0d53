#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "hycot/kernels.hpp"

namespace hycot::kernels {

#if defined(HYCOT_HAVE_AVX2)
const KernelTable& avx2_table();  // avx2.cpp
#endif

bool cpu_supports_avx2_fma() {
#if defined(HYCOT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
#if defined(HYCOT_HAVE_AVX2)
  if (cpu_supports_avx2_fma()) return &avx2_table();
#endif
  return nullptr;
}

namespace {

const KernelTable* resolve(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "auto" || name.empty()) {
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{[] {
    const char* env = std::getenv("HYCOT_KERNELS");
    const KernelTable* t = resolve(env ? env : "auto");
    return t ? t : resolve("auto");
  }()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  const KernelTable* t = resolve(name);
  if (!t) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  thread_local std::vector<double> bt;
  bt.resize(n * k);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  active().gemm_nn(m, n, k, a, bt.data(), c);
}

}  // namespace hycot::kernels
