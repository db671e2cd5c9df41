#include "deqmri/simd/kernels.hpp"

namespace deqmri::simd {
namespace {

void conv_accumulate(double *out, double const *in, long h, long w, double const *k, long ks)
{
  long const pw = w + ks - 1;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = out[y * w + x];
      for (long ty = 0; ty < ks; ++ty) {
        double const *row = in + (y + ty) * pw + x;
        for (long tx = 0; tx < ks; ++tx) {
          acc += k[ty * ks + tx] * row[tx];
        }
      }
      out[y * w + x] = acc;
    }
  }
}

void conv_weight_grad(double *gk, double const *dout, double const *in, long h, long w, long ks)
{
  long const pw = w + ks - 1;
  for (long ty = 0; ty < ks; ++ty) {
    for (long tx = 0; tx < ks; ++tx) {
      double acc = 0.0;
      for (long y = 0; y < h; ++y) {
        double const *row = in + (y + ty) * pw + tx;
        double const *d = dout + y * w;
        for (long x = 0; x < w; ++x) {
          acc += d[x] * row[x];
        }
      }
      gk[ty * ks + tx] += acc;
    }
  }
}

void axpy(long n, double a, double const *x, double *y)
{
  for (long i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

auto dot(long n, double const *x, double const *y) -> double
{
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    acc += x[i] * y[i];
  }
  return acc;
}

void cmul(long n, Cx const *a, Cx const *b, Cx *out)
{
  for (long i = 0; i < n; ++i) {
    double const ar = a[i].real(), ai = a[i].imag(), br = b[i].real(), bi = b[i].imag();
    out[i] = Cx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void cmul_conj_acc(long n, Cx const *a, Cx const *b, Cx *out)
{
  for (long i = 0; i < n; ++i) {
    double const ar = a[i].real(), ai = a[i].imag(), br = b[i].real(), bi = b[i].imag();
    out[i] += Cx(ar * br + ai * bi, ar * bi - ai * br);
  }
}

constexpr Kernels table{"scalar", conv_accumulate, conv_weight_grad, axpy, dot, cmul, cmul_conj_acc};

} // namespace

auto scalar_kernels() -> Kernels const & { return table; }

} // namespace deqmri::simd
