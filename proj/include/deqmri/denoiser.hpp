#pragma once

// Small convolutional prior operating on the (re, im) channel embedding of a
// complex image. Layers are zero-padded "same" cross-correlations with an
// optional bias and a shifted soft-plus on hidden layers; the input is added
// back to the output when `residual` is set.
//
// Checkpoint directory: manifest.txt (layer spec, version, crc32) plus
// theta.f64 (flat parameters) and sn_state.f64 (power-iteration vectors),
// both little-endian float64.

#include "deqmri/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace deqmri {

struct LayerSpec
{
  long in_ch = 2;
  long out_ch = 2;
  long kernel = 3; // odd, at most 7
  bool activation = false;

  auto operator==(LayerSpec const &) const -> bool = default;
};

struct DenoiserSpec
{
  long h = 0;
  long w = 0;
  std::vector<LayerSpec> layers;
  bool residual = true;
  bool bias = true;
  // hidden activation is (softplus(beta z) - log 2) / beta: 1-Lipschitz for any beta,
  // but bends at amplitude ~1/beta instead of ~1
  double beta = 1.0;

  // depth conv layers, `channels` wide, activation on all but the last.
  static auto standard(long h, long w, long depth = 3, long channels = 16, long kernel = 3) -> DenoiserSpec;

  auto weight_count(long layer) const -> long;
  auto param_count() const -> long;
  void validate() const;
  auto operator==(DenoiserSpec const &) const -> bool = default;
};

using GradVector = std::vector<double>;

struct DenoiserParams
{
  DenoiserSpec spec;
  std::vector<double> theta;
  std::vector<std::vector<double>> sn_u; // per layer, in_ch*h*w; empty until first normalisation

  auto weight_offset(long layer) const -> long;
  auto bias_offset(long layer) const -> long; // valid only when spec.bias
  auto weights(long layer) -> std::span<double>;
  auto weights(long layer) const -> std::span<double const>;
};

// Hidden layers ~ N(0, 1/fan_in); the last layer is additionally scaled by
// `last_scale`, so for small values the residual network starts near identity.
auto init_params(DenoiserSpec const &spec, std::uint64_t seed, double last_scale = 1e-2) -> DenoiserParams;

auto zero_params(DenoiserSpec const &spec) -> DenoiserParams;

auto denoise(DenoiserParams const &p, ComplexImage const &x) -> ComplexImage;

// Gradient in theta of Real<f_theta(x), v>, i.e. Real((d f / d theta)^H v).
auto param_vjp(DenoiserParams const &p, ComplexImage const &x, ComplexImage const &v) -> GradVector;

// Linear part (no bias) of one layer and its adjoint, on channel-major planes
// of size ch*h*w. Exposed for norm estimation and tests.
void apply_layer(DenoiserParams const &p, long layer, std::span<double const> in, std::span<double> out);
void apply_layer_adjoint(DenoiserParams const &p, long layer, std::span<double const> in, std::span<double> out);

struct SpectralNormConfig
{
  long iterations = 5;
  long warmup_iterations = 50; // used when a layer has no stored vector yet
  // after the fixed count, keep iterating while the estimate still moves by more than settle (relative)
  double settle = 1e-5;
  long max_iterations = 300;
};

// Power-iteration estimate of a layer's operator norm. Updates sn_u[layer].
auto estimate_layer_norm(DenoiserParams &p, long layer, long iterations) -> double;

// Each layer whose estimated top singular value exceeds 1 is divided by it.
// Layers already within the unit ball, including all-zero layers, are kept.
auto spectral_normalize(DenoiserParams p, SpectralNormConfig const &cfg = {}) -> DenoiserParams;

void save_checkpoint(std::filesystem::path const &dir, DenoiserParams const &p);
auto load_checkpoint(std::filesystem::path const &dir) -> DenoiserParams;

} // namespace deqmri
