#pragma once

// Shared fixtures and independent oracles for the unit tests.

#include "deqmri/datagen.hpp"
#include "deqmri/denoiser.hpp"
#include "deqmri/deq.hpp"
#include "deqmri/linops.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <unistd.h>

namespace testing {

using namespace deqmri;

inline auto rand_image(long h, long w, Rng &rng, double scale = 1.0) -> ComplexImage
{
  std::normal_distribution<double> n{0.0, scale};
  ComplexImage x(h, w);
  for (auto &v : x.data) {
    double const re = n(rng);
    v = Cx{re, n(rng)};
  }
  return x;
}

inline auto rand_coils(long h, long w, long c, Rng &rng) -> CoilSensitivities
{
  std::normal_distribution<double> n{0.0, 1.0};
  CoilSensitivities s;
  s.coils = c;
  s.h = h;
  s.w = w;
  s.maps.resize(static_cast<std::size_t>(c * h * w));
  for (auto &v : s.maps) {
    double const re = n(rng);
    v = Cx{re, n(rng)};
  }
  normalize_coils(s);
  return s;
}

inline auto unit_coil(long h, long w) -> CoilSensitivities
{
  CoilSensitivities s;
  s.coils = 1;
  s.h = h;
  s.w = w;
  s.maps.assign(static_cast<std::size_t>(h * w), Cx{1.0, 0.0});
  return s;
}

inline auto rand_kspace(long c, long h, long w, SamplingMask const &m, Rng &rng) -> KSpace
{
  std::normal_distribution<double> n{0.0, 1.0};
  KSpace y(c, h, w);
  for (long ci = 0; ci < c; ++ci) {
    for (long r = 0; r < h; ++r) {
      for (long k = 0; k < w; ++k) {
        if (m.contains(k)) { y(ci, r, k) = Cx{n(rng), n(rng)}; }
      }
    }
  }
  return y;
}

// Direct double-sum centred unitary DFT: output index k holds frequency k - n/2.
inline auto naive_dft(ComplexImage const &x) -> ComplexImage
{
  ComplexImage out(x.h, x.w);
  double const sc = 1.0 / std::sqrt(static_cast<double>(x.h * x.w));
  for (long a = 0; a < x.h; ++a) {
    double const fa = static_cast<double>(a - x.h / 2);
    for (long b = 0; b < x.w; ++b) {
      double const fb = static_cast<double>(b - x.w / 2);
      Cx acc{};
      for (long r = 0; r < x.h; ++r) {
        for (long c = 0; c < x.w; ++c) {
          double const ph = -2.0 * std::numbers::pi * (fa * static_cast<double>(r) / static_cast<double>(x.h) +
                                                       fb * static_cast<double>(c) / static_cast<double>(x.w));
          acc += x(r, c) * Cx{std::cos(ph), std::sin(ph)};
        }
      }
      out(a, b) = sc * acc;
    }
  }
  return out;
}

inline auto rel(ComplexImage const &a, ComplexImage const &b) -> double
{
  double const d = norm(a - b), n = norm(b);
  return n > 0.0 ? d / n : d;
}

inline auto rel(std::vector<double> const &a, std::vector<double> const &b) -> double
{
  double d = 0.0, n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    n += b[i] * b[i];
  }
  return n > 0.0 ? std::sqrt(d / n) : std::sqrt(d);
}

// Small mixed-size network used by the gradient checks.
inline auto small_spec(long h, long w) -> DenoiserSpec
{
  DenoiserSpec s;
  s.h = h;
  s.w = w;
  s.layers = {{2, 4, 3, true}, {4, 3, 5, true}, {3, 2, 1, false}};
  return s;
}

// Random parameters of order one so every path of the network is exercised.
inline auto rand_params(DenoiserSpec const &spec, Rng &rng, double scale = 0.3) -> DenoiserParams
{
  auto p = zero_params(spec);
  std::normal_distribution<double> n{0.0, scale};
  for (auto &t : p.theta) {
    t = n(rng);
  }
  return p;
}

// Central-difference gradient of a scalar function of theta.
template <class F>
auto fd_gradient(DenoiserParams const &p, F &&f, double eps = 1e-6) -> std::vector<double>
{
  std::vector<double> g(p.theta.size());
  auto q = p;
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    q.theta[i] = p.theta[i] + eps;
    double const fp = f(q);
    q.theta[i] = p.theta[i] - eps;
    double const fm = f(q);
    q.theta[i] = p.theta[i];
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

struct TempDir
{
  std::filesystem::path path;
  explicit TempDir(std::string const &tag)
  {
    static long counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("deqmri_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace testing
