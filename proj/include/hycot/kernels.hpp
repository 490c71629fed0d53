#pragma once

// Dense arithmetic kernels behind the tensor layer.
//
// Every kernel has a portable scalar reference and, where the CPU supports
// it, an AVX2+FMA variant. The variants are written so that each output
// element sees the same sequence of IEEE operations as the scalar code
// (fused multiply-add accumulated in index order, no reassociation), so
// the two tables are expected to agree bit for bit. That property is what
// keeps pixelwise results independent of batch size and of the selected ISA.

#include <cstddef>
#include <string_view>

namespace hycot::kernels {

struct AdamParams {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  const char* name;

  // C[M x N] += A[M x K] * B[K x N], all row-major and contiguous.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  // C[M x N] += A^T * B with A stored [K x M] and B stored [K x N].
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

  // y = x >= 0 ? x : slope * x
  void (*leaky_relu)(std::size_t n, double slope, const double* x, double* y);

  // Bias-corrected Adam on one contiguous parameter array.
  void (*adam_update)(std::size_t n, const AdamParams& p, const double* grad,
                      double* weights, double* m, double* v);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 table was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2_fma();

/// Table used by the tensor layer. Resolved on first call from the
/// HYCOT_KERNELS environment variable ("scalar", "avx2", "auto"; default auto).
const KernelTable& active();

/// Overrides the active table. Accepts "scalar", "avx2" or "auto".
/// Returns false (and leaves the selection unchanged) if unavailable.
bool select(std::string_view name);

// C[M x N] += A[M x K] * B^T with B stored [N x K]. Transposes B into
// scratch and defers to gemm_nn, so it inherits gemm_nn's ordering.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);

}  // namespace hycot::kernels
