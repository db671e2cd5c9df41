#include "deqmri/metrics.hpp"
#include "deqmri/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace deqmri {

auto psnr(std::span<double const> image, std::span<double const> reference) -> double
{
  if (image.size() != reference.size()) { throw DimensionError("psnr: image sizes differ"); }
  double peak = 0.0;
  for (double v : reference) {
    peak = std::max(peak, v);
  }
  if (reference.empty() || peak <= 0.0) { throw ArgumentError("psnr: reference has zero peak"); }
  double mse = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    double const d = image[i] - reference[i];
    mse += d * d;
  }
  mse /= static_cast<double>(image.size());
  if (mse == 0.0) { return kPsnrCap; }
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

auto ssim(std::span<double const> image, std::span<double const> reference, long h, long w, double data_range)
  -> double
{
  constexpr long win = 11;
  constexpr double sigma = 1.5;
  if (static_cast<long>(image.size()) != h * w || static_cast<long>(reference.size()) != h * w) {
    throw DimensionError("ssim: buffer sizes do not match " + std::to_string(h) + "x" + std::to_string(w));
  }
  if (h < win || w < win) { throw DimensionError("ssim: images must be at least 11x11"); }

  std::array<double, win> g{};
  double gs = 0.0;
  for (long i = 0; i < win; ++i) {
    double const d = static_cast<double>(i - win / 2);
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    gs += g[static_cast<std::size_t>(i)];
  }
  for (auto &v : g) {
    v /= gs;
  }
  double const c1 = (0.01 * data_range) * (0.01 * data_range);
  double const c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  long count = 0;
  for (long r = 0; r + win <= h; ++r) {
    for (long c = 0; c + win <= w; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (long i = 0; i < win; ++i) {
        for (long j = 0; j < win; ++j) {
          double const wt = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
          double const a = image[static_cast<std::size_t>((r + i) * w + c + j)];
          double const b = reference[static_cast<std::size_t>((r + i) * w + c + j)];
          ma += wt * a;
          mb += wt * b;
          saa += wt * a * a;
          sbb += wt * b * b;
          sab += wt * a * b;
        }
      }
      double const va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

} // namespace deqmri
