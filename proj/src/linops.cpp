#include "deqmri/linops.hpp"
#include "deqmri/simd/kernels.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

namespace deqmri {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache
{
public:
  auto get(long h, long w, int sign) -> fftw_plan
  {
    std::lock_guard lock{mutex_};
    auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) { return it->second; }
    std::vector<Cx> a(static_cast<std::size_t>(h * w)), b(a.size());
    auto *p = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), reinterpret_cast<fftw_complex *>(a.data()),
                               reinterpret_cast<fftw_complex *>(b.data()), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  ~PlanCache()
  {
    for (auto &kv : plans_) {
      fftw_destroy_plan(kv.second);
    }
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<long, long, int>, fftw_plan> plans_;
};

auto plans() -> PlanCache &
{
  static PlanCache cache;
  return cache;
}

// dst[(r + sr) mod h, (c + sc) mod w] = src[r, c]
void circshift(Cx const *src, Cx *dst, long h, long w, long sr, long sc)
{
  for (long r = 0; r < h; ++r) {
    long const rr = (r + sr) % h;
    for (long c = 0; c < w; ++c) {
      dst[rr * w + (c + sc) % w] = src[r * w + c];
    }
  }
}

void transform(Cx *data, long h, long w, int sign)
{
  std::vector<Cx> tmp(static_cast<std::size_t>(h * w));
  auto plan = plans().get(h, w, sign);
  double const scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  if (sign == FFTW_FORWARD) {
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(data), reinterpret_cast<fftw_complex *>(tmp.data()));
    circshift(tmp.data(), data, h, w, h / 2, w / 2);
  } else {
    circshift(data, tmp.data(), h, w, h - h / 2, w - w / 2);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(tmp.data()), reinterpret_cast<fftw_complex *>(data));
  }
  for (long i = 0; i < h * w; ++i) {
    data[i] *= scale;
  }
}

void check_shapes(long h, long w, CoilSensitivities const &s, SamplingMask const &m, char const *where)
{
  if (s.h != h || s.w != w) {
    throw DimensionError(std::string(where) + ": coil maps are " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         ", image is " + std::to_string(h) + "x" + std::to_string(w));
  }
  if (m.width() != w) {
    throw DimensionError(std::string(where) + ": mask has " + std::to_string(m.width()) + " lines, expected " +
                         std::to_string(w));
  }
}

void zero_unsampled(Cx *plane, long h, long w, SamplingMask const &m)
{
  for (long r = 0; r < h; ++r) {
    for (long k = 0; k < w; ++k) {
      if (!m.contains(k)) { plane[r * w + k] = Cx{}; }
    }
  }
}

} // namespace

void fft2c(Cx *data, long h, long w) { transform(data, h, w, FFTW_FORWARD); }
void ifft2c(Cx *data, long h, long w) { transform(data, h, w, FFTW_BACKWARD); }

void normalize_coils(CoilSensitivities &s)
{
  long const n = s.h * s.w;
  for (long i = 0; i < n; ++i) {
    double ss = 0.0;
    for (long c = 0; c < s.coils; ++c) {
      ss += std::norm(s.maps[static_cast<std::size_t>(c * n + i)]);
    }
    if (ss > 0.0) {
      double const inv = 1.0 / std::sqrt(ss);
      for (long c = 0; c < s.coils; ++c) {
        s.maps[static_cast<std::size_t>(c * n + i)] *= inv;
      }
    } else {
      s.maps[static_cast<std::size_t>(i)] = Cx{1.0, 0.0};
    }
  }
}

auto coil_normalization_error(CoilSensitivities const &s) -> double
{
  long const n = s.h * s.w;
  double worst = 0.0;
  for (long i = 0; i < n; ++i) {
    double ss = 0.0;
    for (long c = 0; c < s.coils; ++c) {
      ss += std::norm(s.maps[static_cast<std::size_t>(c * n + i)]);
    }
    worst = std::max(worst, std::abs(ss - 1.0));
  }
  return worst;
}

auto to_string(WeightMode m) -> char const * { return m == WeightMode::exact ? "exact" : "empirical"; }

auto parse_weight_mode(std::string const &s) -> WeightMode
{
  if (s == "exact") { return WeightMode::exact; }
  if (s == "empirical") { return WeightMode::empirical; }
  throw ArgumentError("unknown weight mode '" + s + "' (expected exact|empirical)");
}

auto unit_weight(long w) -> WeightVector
{
  return WeightVector{std::vector<double>(static_cast<std::size_t>(w), 1.0), WeightMode::exact};
}

auto forward_op(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &m) -> KSpace
{
  check_shapes(x.h, x.w, s, m, "forward_op");
  auto const &k = simd::active();
  KSpace y(s.coils, x.h, x.w);
  y.mask_id = m.id;
  for (long c = 0; c < s.coils; ++c) {
    Cx *p = y.plane(c);
    k.cmul(x.size(), s.plane(c), x.data.data(), p);
    fft2c(p, x.h, x.w);
    zero_unsampled(p, x.h, x.w, m);
  }
  return y;
}

auto adjoint_op(KSpace const &y, CoilSensitivities const &s, SamplingMask const &m) -> ComplexImage
{
  check_shapes(y.h, y.w, s, m, "adjoint_op");
  if (y.coils != s.coils) {
    throw DimensionError("adjoint_op: k-space has " + std::to_string(y.coils) + " coils, maps have " +
                         std::to_string(s.coils));
  }
  auto const &k = simd::active();
  ComplexImage x(y.h, y.w);
  std::vector<Cx> tmp(static_cast<std::size_t>(y.h * y.w));
  for (long c = 0; c < s.coils; ++c) {
    std::copy(y.plane(c), y.plane(c) + x.size(), tmp.begin());
    zero_unsampled(tmp.data(), y.h, y.w, m);
    ifft2c(tmp.data(), y.h, y.w);
    k.cmul_conj_acc(x.size(), s.plane(c), tmp.data(), x.data.data());
  }
  return x;
}

auto weighted_residual(ComplexImage const &x, KSpace const &y, CoilSensitivities const &s, SamplingMask const &m,
                       std::vector<double> const &line_weight) -> WeightedResidual
{
  if (static_cast<long>(line_weight.size()) != x.w) {
    throw DimensionError("weighted_residual: weight vector length " + std::to_string(line_weight.size()) +
                         " != line count " + std::to_string(x.w));
  }
  if (y.h != x.h || y.w != x.w || y.coils != s.coils) {
    throw DimensionError("weighted_residual: k-space shape does not match image/coils");
  }
  auto r = forward_op(x, s, m);
  double value = 0.0;
  for (long c = 0; c < r.coils; ++c) {
    for (long row = 0; row < r.h; ++row) {
      for (long k = 0; k < r.w; ++k) {
        if (!m.contains(k)) { continue; }
        Cx &v = r(c, row, k);
        v -= y(c, row, k);
        double const wk = line_weight[static_cast<std::size_t>(k)];
        value += 0.5 * wk * std::norm(v);
        v *= wk;
      }
    }
  }
  return {value, adjoint_op(r, s, m)};
}

auto data_fidelity_grad(ComplexImage const &x, KSpace const &y, CoilSensitivities const &s, SamplingMask const &m)
  -> ComplexImage
{
  return weighted_residual(x, y, s, m, std::vector<double>(static_cast<std::size_t>(x.w), 1.0)).grad;
}

auto weighted_normal_op(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &m,
                        std::vector<double> const &line_weight) -> ComplexImage
{
  auto y = forward_op(x, s, m);
  for (long c = 0; c < y.coils; ++c) {
    for (long row = 0; row < y.h; ++row) {
      for (long k = 0; k < y.w; ++k) {
        y(c, row, k) *= line_weight[static_cast<std::size_t>(k)];
      }
    }
  }
  return adjoint_op(y, s, m);
}

auto build_weight(MaskFamily const &family, WeightMode mode, std::vector<SamplingMask> const &draws) -> WeightVector
{
  std::vector<double> freq;
  if (mode == WeightMode::exact) {
    freq = line_frequency(family);
  } else {
    if (draws.empty()) { throw ArgumentError("build_weight: empirical mode needs at least one mask draw"); }
    freq.assign(static_cast<std::size_t>(family.w), 0.0);
    for (auto const &m : draws) {
      if (m.width() != family.w) { throw DimensionError("build_weight: draw width does not match family"); }
      for (long k = 0; k < family.w; ++k) {
        if (m.contains(k)) { freq[static_cast<std::size_t>(k)] += 1.0; }
      }
    }
    for (auto &f : freq) {
      f /= static_cast<double>(draws.size());
    }
  }
  WeightVector out;
  out.mode = mode;
  out.wbar.resize(freq.size());
  for (std::size_t k = 0; k < freq.size(); ++k) {
    out.wbar[k] = freq[k] != 0.0 ? 1.0 / std::sqrt(freq[k]) : 0.0;
  }
  return out;
}

auto subsample_weight(WeightVector const &wbar, SamplingMask const &m) -> std::vector<double>
{
  if (static_cast<long>(wbar.wbar.size()) != m.width()) {
    throw DimensionError("subsample_weight: weight and mask widths differ");
  }
  std::vector<double> out(wbar.wbar.size(), 0.0);
  for (long k = 0; k < m.width(); ++k) {
    if (m.contains(k)) { out[static_cast<std::size_t>(k)] = wbar.wbar[static_cast<std::size_t>(k)] * wbar.wbar[static_cast<std::size_t>(k)]; }
  }
  return out;
}

auto inner(KSpace const &a, KSpace const &b) -> Cx
{
  if (a.data.size() != b.data.size()) { throw DimensionError("inner: k-space shapes differ"); }
  Cx acc{};
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    acc += std::conj(a.data[i]) * b.data[i];
  }
  return acc;
}

auto norm(KSpace const &a) -> double
{
  double acc = 0.0;
  for (auto const &v : a.data) {
    acc += std::norm(v);
  }
  return std::sqrt(acc);
}

} // namespace deqmri
