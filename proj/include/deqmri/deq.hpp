#pragma once

// Deep-equilibrium reconstruction: T(x) = alpha f(s) + (1 - alpha) s with
// s = x - gamma * grad g(x), g(x) = 0.5 ||y - M A x||^2. The forward pass
// iterates T from the zero-filled image; the backward pass is Jacobian-free:
// it differentiates exactly one application of T at the fixed point, with
// x_bar held constant (the inverse-Jacobian factor of implicit
// differentiation is dropped).

#include "deqmri/datagen.hpp"
#include "deqmri/denoiser.hpp"
#include "deqmri/linops.hpp"

#include <optional>
#include <vector>

namespace deqmri {

struct AndersonConfig
{
  long depth = 5;
  double mixing = 1.0;
  double ridge = 1e-8; // relative to the largest squared residual in the window
};

struct DeqConfig
{
  double alpha = 0.5;
  double gamma = 1.0;
  long max_iters = 100;
  double tol = 1e-3;
  std::optional<AndersonConfig> anderson;
  bool abort_on_nonconvergence = false;

  void validate() const;
};

struct FixedPointResult
{
  ComplexImage x_bar;
  long iters = 0;
  std::vector<double> residuals; // ||x^k - x^{k-1}|| / ||x^{k-1}||, one per iteration
  bool converged = false;
};

// s = x - gamma * A^H M^T (M A x - y)
auto gradient_step(ComplexImage const &x, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
                   double gamma) -> ComplexImage;

auto t_operator(DenoiserParams const &params, ComplexImage const &x, KSpace const &y, SamplingMask const &mask,
                CoilSensitivities const &s, DeqConfig const &cfg) -> ComplexImage;

// Throws DivergenceError on a non-finite iterate, and also when the budget is
// exhausted with cfg.abort_on_nonconvergence set.
auto forward_fixed_point(DenoiserParams const &params, KSpace const &y, SamplingMask const &mask,
                         CoilSensitivities const &s, DeqConfig const &cfg) -> FixedPointResult;

struct JfbResult
{
  GradVector grad;
  double loss = 0.0;
  FixedPointResult forward;
};

// Backward pieces at a given x_bar. line_weight is the per-line diagonal of W
// (see subsample_weight); all ones gives the unweighted loss.
auto jfb_self_at(DenoiserParams const &params, ComplexImage const &x_bar, TrainingPair const &pair,
                 CoilSensitivities const &s, std::vector<double> const &line_weight, DeqConfig const &cfg)
  -> std::pair<GradVector, double>;

auto jfb_sup_at(DenoiserParams const &params, ComplexImage const &x_bar, KSpace const &y, SamplingMask const &mask,
                CoilSensitivities const &s, ComplexImage const &groundtruth, DeqConfig const &cfg)
  -> std::pair<GradVector, double>;

// Self-supervised: forward on (y, mask), loss 0.5 ||M'A x_bar - y'||_W^2 with
// W from wbar subsampled on mask'.
auto jfb_self(DenoiserParams const &params, TrainingPair const &pair, CoilSensitivities const &s,
              WeightVector const &wbar, DeqConfig const &cfg) -> JfbResult;

// Supervised: loss 0.5 ||x_bar - x||^2.
auto jfb_sup(DenoiserParams const &params, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
             ComplexImage const &groundtruth, DeqConfig const &cfg) -> JfbResult;

} // namespace deqmri
