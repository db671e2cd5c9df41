#pragma once

#include "deqmri/datagen.hpp"
#include "deqmri/linops.hpp"

#include <vector>

namespace deqmri {

// A^H M^T y; the pseudoinverse for orthogonal A.
auto zero_filled(KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s) -> ComplexImage;

struct TvConfig
{
  double tau = 0.01;
  long iters = 100;       // outer proximal-gradient iterations
  double step = 1.0;      // <= 1 / ||A^H M^T M A|| = 1 for normalised coils
  long inner_iters = 20;  // dual projected-gradient iterations per prox
};

// sum_i (|x[i, j+1] - x[i, j]| + |x[i+1, j] - x[i, j]|), circular boundary (no tau).
auto tv_norm(ComplexImage const &x) -> double;

// 0.5 ||y - M A x||^2 + tau * tv_norm(x)
auto tv_objective(ComplexImage const &x, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
                  double tau) -> double;

struct TvResult
{
  ComplexImage image;
  std::vector<double> objective; // at x0 and after every outer iteration
};

// Proximal gradient from the zero-filled image. The TV prox is solved
// approximately on the dual; an outer step whose objective would increase is
// retried with more inner iterations and otherwise rejected, so the
// objective sequence is non-increasing.
auto tv_reconstruct(KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s, TvConfig const &cfg)
  -> TvResult;

// Picks the tau from `grid` with the best mean magnitude PSNR on `data` (needs groundtruth).
auto tv_grid_search(Dataset const &data, std::vector<double> const &grid, TvConfig base) -> TvConfig;

} // namespace deqmri
