#pragma once

#include <span>

namespace deqmri {

inline constexpr double kPsnrCap = 300.0;

// 10 log10(peak^2 / MSE) with peak = max(reference). Identical images give kPsnrCap.
// Throws ArgumentError for an all-zero (or empty) reference, DimensionError on size mismatch.
auto psnr(std::span<double const> image, std::span<double const> reference) -> double;

// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range `data_range`.
auto ssim(std::span<double const> image, std::span<double const> reference, long h, long w, double data_range = 1.0)
  -> double;

} // namespace deqmri
