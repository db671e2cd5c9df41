#include "deqmri/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace deqmri::simd {

#if defined(DEQMRI_HAVE_AVX2)
auto avx2_table() -> Kernels const *;
#endif

namespace {

auto cpu_has_avx2() -> bool
{
#if defined(DEQMRI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

auto pick_default() -> Kernels const *
{
  if (char const *env = std::getenv("DEQMRI_KERNELS")) {
    std::string const want{env};
    if (want == "scalar") { return &scalar_kernels(); }
    if (want == "avx2" && avx2_kernels()) { return avx2_kernels(); }
  }
  if (auto const *k = avx2_kernels()) { return k; }
  return &scalar_kernels();
}

auto slot() -> std::atomic<Kernels const *> &
{
  static std::atomic<Kernels const *> current{pick_default()};
  return current;
}

} // namespace

auto avx2_kernels() -> Kernels const *
{
#if defined(DEQMRI_HAVE_AVX2)
  static bool const ok = cpu_has_avx2();
  return ok ? avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

auto active() -> Kernels const & { return *slot().load(std::memory_order_acquire); }

auto select(std::string_view name) -> bool
{
  if (name == "scalar") {
    slot().store(&scalar_kernels(), std::memory_order_release);
    return true;
  }
  if (name == "avx2" && avx2_kernels()) {
    slot().store(avx2_kernels(), std::memory_order_release);
    return true;
  }
  return false;
}

} // namespace deqmri::simd
