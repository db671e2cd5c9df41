// Compiled with -mavx2 -mfma. Only reached through the dispatcher after a
// CPUID check, so nothing here may run on hosts without AVX2.
#include "deqmri/simd/kernels.hpp"

#include <immintrin.h>

namespace deqmri::simd {
namespace {

constexpr long kMaxTaps = 49; // up to 7x7 kernels

inline auto hsum(__m256d v) -> double
{
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void conv_accumulate(double *out, double const *in, long h, long w, double const *k, long ks)
{
  long const pw = w + ks - 1;
  long const taps = ks * ks;
  __m256d kv[kMaxTaps];
  for (long t = 0; t < taps; ++t) {
    kv[t] = _mm256_set1_pd(k[t]);
  }
  long const w4 = w & ~3L;
  for (long y = 0; y < h; ++y) {
    double *o = out + y * w;
    long x = 0;
    for (; x < w4; x += 4) {
      __m256d acc = _mm256_loadu_pd(o + x);
      for (long ty = 0; ty < ks; ++ty) {
        double const *row = in + (y + ty) * pw + x;
        for (long tx = 0; tx < ks; ++tx) {
          acc = _mm256_fmadd_pd(kv[ty * ks + tx], _mm256_loadu_pd(row + tx), acc);
        }
      }
      _mm256_storeu_pd(o + x, acc);
    }
    for (; x < w; ++x) {
      double acc = o[x];
      for (long ty = 0; ty < ks; ++ty) {
        double const *row = in + (y + ty) * pw + x;
        for (long tx = 0; tx < ks; ++tx) {
          acc += k[ty * ks + tx] * row[tx];
        }
      }
      o[x] = acc;
    }
  }
}

void conv_weight_grad(double *gk, double const *dout, double const *in, long h, long w, long ks)
{
  long const pw = w + ks - 1;
  long const taps = ks * ks;
  __m256d acc[kMaxTaps];
  double tail[kMaxTaps] = {};
  for (long t = 0; t < taps; ++t) {
    acc[t] = _mm256_setzero_pd();
  }
  long const w4 = w & ~3L;
  for (long y = 0; y < h; ++y) {
    double const *d = dout + y * w;
    long x = 0;
    for (; x < w4; x += 4) {
      __m256d const dv = _mm256_loadu_pd(d + x);
      for (long ty = 0; ty < ks; ++ty) {
        double const *row = in + (y + ty) * pw + x;
        for (long tx = 0; tx < ks; ++tx) {
          acc[ty * ks + tx] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(row + tx), acc[ty * ks + tx]);
        }
      }
    }
    for (; x < w; ++x) {
      for (long ty = 0; ty < ks; ++ty) {
        double const *row = in + (y + ty) * pw + x;
        for (long tx = 0; tx < ks; ++tx) {
          tail[ty * ks + tx] += d[x] * row[tx];
        }
      }
    }
  }
  for (long t = 0; t < taps; ++t) {
    gk[t] += hsum(acc[t]) + tail[t];
  }
}

void axpy(long n, double a, double const *x, double *y)
{
  __m256d const av = _mm256_set1_pd(a);
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) {
    y[i] += a * x[i];
  }
}

auto dot(long n, double const *x, double const *y) -> double
{
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  long i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    acc += x[i] * y[i];
  }
  return acc;
}

// Two complex numbers per register, interleaved (re, im, re, im).
void cmul(long n, Cx const *a, Cx const *b, Cx *out)
{
  auto const *ap = reinterpret_cast<double const *>(a);
  auto const *bp = reinterpret_cast<double const *>(b);
  auto *op = reinterpret_cast<double *>(out);
  long i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d const av = _mm256_loadu_pd(ap + 2 * i);
    __m256d const bv = _mm256_loadu_pd(bp + 2 * i);
    __m256d const bre = _mm256_movedup_pd(bv);
    __m256d const bim = _mm256_permute_pd(bv, 0xF);
    __m256d const asw = _mm256_permute_pd(av, 0x5);
    _mm256_storeu_pd(op + 2 * i, _mm256_fmaddsub_pd(av, bre, _mm256_mul_pd(asw, bim)));
  }
  for (; i < n; ++i) {
    double const ar = a[i].real(), ai = a[i].imag(), br = b[i].real(), bi = b[i].imag();
    out[i] = Cx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void cmul_conj_acc(long n, Cx const *a, Cx const *b, Cx *out)
{
  auto const *ap = reinterpret_cast<double const *>(a);
  auto const *bp = reinterpret_cast<double const *>(b);
  auto *op = reinterpret_cast<double *>(out);
  long i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d const av = _mm256_loadu_pd(ap + 2 * i);
    __m256d const bv = _mm256_loadu_pd(bp + 2 * i);
    __m256d const are = _mm256_movedup_pd(av);
    __m256d const aim = _mm256_permute_pd(av, 0xF);
    __m256d const bsw = _mm256_permute_pd(bv, 0x5);
    __m256d const prod = _mm256_fmsubadd_pd(are, bv, _mm256_mul_pd(aim, bsw));
    _mm256_storeu_pd(op + 2 * i, _mm256_add_pd(_mm256_loadu_pd(op + 2 * i), prod));
  }
  for (; i < n; ++i) {
    double const ar = a[i].real(), ai = a[i].imag(), br = b[i].real(), bi = b[i].imag();
    out[i] += Cx(ar * br + ai * bi, ar * bi - ai * br);
  }
}

constexpr Kernels table{"avx2", conv_accumulate, conv_weight_grad, axpy, dot, cmul, cmul_conj_acc};

} // namespace

auto avx2_table() -> Kernels const * { return &table; }

} // namespace deqmri::simd
