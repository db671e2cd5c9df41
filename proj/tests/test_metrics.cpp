#include "doctest.h"
#include "deqmri/metrics.hpp"
#include "deqmri/types.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace deqmri;

namespace {

// Straight from the definition, written independently of the library.
auto psnr_ref(std::vector<double> const &a, std::vector<double> const &b) -> double
{
  double peak = *std::max_element(b.begin(), b.end()), s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return 10 * std::log10(peak * peak / (s / static_cast<double>(a.size())));
}

// Naive SSIM: build the full 2-D window explicitly, compute statistics per window.
auto ssim_ref(std::vector<double> const &a, std::vector<double> const &b, long h, long w) -> double
{
  double win[11][11];
  double tot = 0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      tot += win[i][j];
    }
  }
  double const C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double sum = 0;
  long n = 0;
  for (long r = 0; r <= h - 11; ++r) {
    for (long c = 0; c <= w - 11; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          mx += win[i][j] / tot * a[static_cast<std::size_t>((r + i) * w + c + j)];
          my += win[i][j] / tot * b[static_cast<std::size_t>((r + i) * w + c + j)];
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          double const dx = a[static_cast<std::size_t>((r + i) * w + c + j)] - mx;
          double const dy = b[static_cast<std::size_t>((r + i) * w + c + j)] - my;
          vx += win[i][j] / tot * dx * dx;
          vy += win[i][j] / tot * dy * dy;
          cxy += win[i][j] / tot * dx * dy;
        }
      }
      sum += (2 * mx * my + C1) * (2 * cxy + C2) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

auto rand_vec(std::size_t n, std::mt19937_64 &rng) -> std::vector<double>
{
  std::uniform_real_distribution<double> u{0.0, 1.0};
  std::vector<double> v(n);
  for (auto &x : v) {
    x = u(rng);
  }
  return v;
}

} // namespace

TEST_CASE("PSNR")
{
  std::vector<double> b(256, 1.0), a(256, 1.0);
  CHECK(psnr(a, b) == kPsnrCap);
  a[17] = 0.0;
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(256.0)).epsilon(1e-14));
  CHECK(psnr(a, b) == doctest::Approx(24.08).epsilon(1e-3));

  std::mt19937_64 rng{1};
  for (int t = 0; t < 10; ++t) {
    auto const x = rand_vec(300, rng), y = rand_vec(300, rng);
    CHECK(std::abs(psnr(x, y) - psnr_ref(x, y)) < 1e-10);
  }
  std::vector<double> zero(16, 0.0), one(16, 1.0);
  CHECK_THROWS_AS(psnr(one, zero), ArgumentError);
  CHECK_THROWS_AS(psnr(std::vector<double>{}, std::vector<double>{}), ArgumentError);
  CHECK_THROWS_AS(psnr(std::vector<double>(3, 1.0), one), DimensionError);
}

TEST_CASE("SSIM")
{
  std::mt19937_64 rng{2};
  long const h = 20, w = 23;
  auto const b = rand_vec(static_cast<std::size_t>(h * w), rng);

  CHECK(ssim(b, b, h, w) == doctest::Approx(1.0).epsilon(1e-14));

  std::vector<double> inv(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    inv[i] = 1.0 - b[i];
  }
  CHECK(ssim(inv, b, h, w) < 1.0);

  for (int t = 0; t < 5; ++t) {
    auto const x = rand_vec(b.size(), rng), y = rand_vec(b.size(), rng);
    CHECK(std::abs(ssim(x, y, h, w) - ssim_ref(x, y, h, w)) < 1e-10);
    double const v = ssim(x, y, h, w);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  SUBCASE("constant against shifted constant reduces to the luminance term")
  {
    double const c = 0.4, d = 0.7;
    std::vector<double> x(11 * 11, c), y(11 * 11, d);
    double const C1 = 1e-4;
    double const hand = (2 * c * d + C1) / (c * c + d * d + C1);
    CHECK(ssim(x, y, 11, 11) == doctest::Approx(hand).epsilon(1e-13));
  }

  CHECK_THROWS_AS(ssim(b, b, h, w + 1), DimensionError);
  CHECK_THROWS_AS(ssim(std::vector<double>(100), std::vector<double>(100), 10, 10), DimensionError);
}
