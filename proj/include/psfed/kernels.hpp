#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace psfed::kern {

/// Arithmetic kernels behind the training inner loops. Every entry has a
/// scalar reference implementation; SIMD variants are selected once at
/// startup and must agree with the reference to rounding error.
struct Ops {
  // sum_i x[i]*y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a*x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // x[i] = max(x[i], 0)
  void (*relu)(double* x, std::size_t n);
  // g[i] = 0 where post-activation y[i] == 0
  void (*relu_backward)(const double* y, double* g, std::size_t n);
};

enum class Variant { scalar, avx2, neon };

const char* variant_name(Variant v);

// Variants compiled into this binary and usable on this CPU.
std::vector<Variant> available_variants();

// Active table. Selected on first use: PSFED_KERNELS env var
// ("scalar"/"avx2"/"neon"/"auto") if set, otherwise the widest available.
const Ops& ops();
Variant active_variant();

// Table for a specific variant (throws if unavailable). Used by the
// equivalence tests and by force_variant.
const Ops& ops_for(Variant v);

// Overrides the active selection (takes effect immediately; process-wide).
void force_variant(Variant v);

extern const Ops scalar_ops;
#if defined(PSFED_HAVE_AVX2)
extern const Ops avx2_ops;
bool cpu_supports_avx2();
#endif
#if defined(__aarch64__)
extern const Ops neon_ops;
#endif

}  // namespace psfed::kern
