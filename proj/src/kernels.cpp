#include "psfed/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace psfed::kern {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::scalar: return "scalar";
    case Variant::avx2: return "avx2";
    case Variant::neon: return "neon";
  }
  return "?";
}

std::vector<Variant> available_variants() {
  std::vector<Variant> out{Variant::scalar};
#if defined(PSFED_HAVE_AVX2)
  if (cpu_supports_avx2()) out.push_back(Variant::avx2);
#endif
#if defined(__aarch64__)
  out.push_back(Variant::neon);
#endif
  return out;
}

const Ops& ops_for(Variant v) {
  switch (v) {
    case Variant::scalar:
      return scalar_ops;
    case Variant::avx2:
#if defined(PSFED_HAVE_AVX2)
      if (cpu_supports_avx2()) return avx2_ops;
#endif
      throw std::runtime_error("avx2 kernels unavailable on this machine");
    case Variant::neon:
#if defined(__aarch64__)
      return neon_ops;
#else
      throw std::runtime_error("neon kernels unavailable on this machine");
#endif
  }
  throw std::runtime_error("unknown kernel variant");
}

namespace {

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Variant> g_variant{Variant::scalar};

Variant pick_default() {
  const char* env = std::getenv("PSFED_KERNELS");
  if (env != nullptr && std::strcmp(env, "auto") != 0 && env[0] != '\0') {
    if (std::strcmp(env, "scalar") == 0) return Variant::scalar;
    if (std::strcmp(env, "avx2") == 0) return Variant::avx2;
    if (std::strcmp(env, "neon") == 0) return Variant::neon;
    throw std::runtime_error(std::string("PSFED_KERNELS: unknown variant '") +
                             env + "'");
  }
  const auto avail = available_variants();
  return avail.back();  // widest available
}

void ensure_selected() {
  if (g_active.load(std::memory_order_acquire) == nullptr) {
    const Variant v = pick_default();
    g_active.store(&ops_for(v), std::memory_order_release);
    g_variant.store(v, std::memory_order_release);
  }
}

}  // namespace

const Ops& ops() {
  ensure_selected();
  return *g_active.load(std::memory_order_acquire);
}

Variant active_variant() {
  ensure_selected();
  return g_variant.load(std::memory_order_acquire);
}

void force_variant(Variant v) {
  g_active.store(&ops_for(v), std::memory_order_release);
  g_variant.store(v, std::memory_order_release);
}

}  // namespace psfed::kern
