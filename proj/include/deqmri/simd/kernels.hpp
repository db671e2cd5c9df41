#pragma once

// Inner-loop kernels with a scalar reference implementation and an AVX2+FMA
// variant. The active table is chosen once at first use from CPUID; setting
// DEQMRI_KERNELS=scalar (or avx2) in the environment overrides the choice.

#include <complex>
#include <string_view>

namespace deqmri::simd {

using Cx = std::complex<double>;

struct Kernels
{
  char const *name;

  // out[y, x] += sum_{ty, tx} k[ty, tx] * in_padded[y + ty, x + tx]
  // in_padded has shape (h + ks - 1, w + ks - 1); out has shape (h, w).
  void (*conv_accumulate)(double *out, double const *in_padded, long h, long w, double const *k, long ks);

  // gk[ty, tx] += sum_{y, x} dout[y, x] * in_padded[y + ty, x + tx]
  void (*conv_weight_grad)(double *gk, double const *dout, double const *in_padded, long h, long w, long ks);

  void (*axpy)(long n, double a, double const *x, double *y);
  double (*dot)(long n, double const *x, double const *y);

  // out[i] = a[i] * b[i]
  void (*cmul)(long n, Cx const *a, Cx const *b, Cx *out);
  // out[i] += conj(a[i]) * b[i]
  void (*cmul_conj_acc)(long n, Cx const *a, Cx const *b, Cx *out);
};

auto scalar_kernels() -> Kernels const &;

// nullptr when the build has no AVX2 translation unit or the CPU lacks AVX2/FMA.
auto avx2_kernels() -> Kernels const *;

auto active() -> Kernels const &;

// Force a table by name ("scalar" or "avx2"). Returns false if unavailable.
auto select(std::string_view name) -> bool;

} // namespace deqmri::simd
