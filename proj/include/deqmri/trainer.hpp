#pragma once

#include "deqmri/datagen.hpp"
#include "deqmri/deq.hpp"
#include "deqmri/denoiser.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace deqmri {

enum class Arm
{
  supervised,
  self_weighted,
  self_unweighted
};

auto to_string(Arm a) -> char const *;
auto parse_arm(std::string const &s) -> Arm;

struct AdamConfig
{
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState
{
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Bias-corrected Adam. Throws ArgumentError naming the first non-finite
// gradient coordinate; leaves state and params untouched in that case.
void adam_step(AdamState &state, std::vector<double> &params, std::vector<double> const &grad, AdamConfig const &cfg);

struct TrainConfig
{
  Arm arm = Arm::self_weighted;
  long epochs = 10;
  long batch_size = 8;
  AdamConfig adam;
  std::uint64_t seed = 0;
  DeqConfig deq;
  WeightMode weight_mode = WeightMode::exact;
  bool shuffle = true;
  bool spectral_norm = true;
  SpectralNormConfig sn;
  long checkpoint_every = 0; // epochs; 0 disables
  std::filesystem::path checkpoint_dir;
};

struct EpochLog
{
  long epoch = 0;
  Arm arm = Arm::self_weighted;
  double loss = 0.0;     // mean per-sample loss over the epoch
  double val_psnr = 0.0; // NaN when no validation set
  double val_ssim = 0.0;
  double wallclock_s = 0.0;
  long nonconverged = 0; // forward passes that hit max_iters
};

struct TrainResult
{
  DenoiserParams params;
  std::vector<EpochLog> log;
};

// Weighting used by an arm: the family weight (exact or empirical over the
// dataset's mask' draws) for self_weighted, all ones otherwise.
auto arm_weight(Arm arm, Dataset const &train, WeightMode mode) -> WeightVector;

// Mini-batch training from `init`. Self-supervised arms run with groundtruth
// access denied on `train`. Per-sample gradients are averaged in sample order.
auto train(TrainConfig const &cfg, DenoiserParams init, Dataset const &train, Dataset const *validation,
           WeightVector const &wbar) -> TrainResult;

struct EvalResult
{
  std::vector<double> psnr;
  std::vector<double> ssim;
  std::vector<long> iters;
  std::vector<bool> converged;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Magnitude PSNR/SSIM of `recon` against the dataset groundtruth.
auto score(std::vector<ComplexImage> const &recon, Dataset const &test) -> EvalResult;

// Reconstruct every test y with the DEQ forward pass and score it.
auto evaluate(DenoiserParams const &params, Dataset const &test, DeqConfig const &cfg) -> EvalResult;

auto reconstruct_all(DenoiserParams const &params, Dataset const &data, DeqConfig const &cfg)
  -> std::vector<FixedPointResult>;

void write_metrics_csv(std::filesystem::path const &path, std::vector<EpochLog> const &log);

} // namespace deqmri
