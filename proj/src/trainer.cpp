#include "deqmri/trainer.hpp"
#include "deqmri/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace deqmri {

auto to_string(Arm a) -> char const *
{
  switch (a) {
  case Arm::supervised: return "supervised";
  case Arm::self_weighted: return "self_weighted";
  case Arm::self_unweighted: return "self_unweighted";
  }
  return "?";
}

auto parse_arm(std::string const &s) -> Arm
{
  if (s == "supervised") { return Arm::supervised; }
  if (s == "self_weighted") { return Arm::self_weighted; }
  if (s == "self_unweighted") { return Arm::self_unweighted; }
  throw ArgumentError("unknown arm '" + s + "' (expected supervised|self_weighted|self_unweighted)");
}

void adam_step(AdamState &state, std::vector<double> &params, std::vector<double> const &grad, AdamConfig const &cfg)
{
  if (grad.size() != params.size()) { throw DimensionError("adam_step: gradient and parameter sizes differ"); }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw ArgumentError("adam_step: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  double const t = static_cast<double>(state.step);
  double const c1 = 1.0 - std::pow(cfg.beta1, t);
  double const c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double const mhat = state.m[i] / c1;
    double const vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

auto arm_weight(Arm arm, Dataset const &train, WeightMode mode) -> WeightVector
{
  if (arm != Arm::self_weighted) { return unit_weight(train.info.w); }
  auto const family = train.family();
  if (mode == WeightMode::exact) { return build_weight(family, mode); }
  std::vector<SamplingMask> draws;
  for (auto const &p : train.pairs) {
    draws.push_back(p.mask_prime);
  }
  return build_weight(family, mode, draws);
}

auto reconstruct_all(DenoiserParams const &params, Dataset const &data, DeqConfig const &cfg)
  -> std::vector<FixedPointResult>
{
  std::vector<FixedPointResult> out;
  out.reserve(data.pairs.size());
  for (auto const &p : data.pairs) {
    out.push_back(forward_fixed_point(params, p.y, p.mask, data.coils, cfg));
  }
  return out;
}

auto score(std::vector<ComplexImage> const &recon, Dataset const &test) -> EvalResult
{
  if (static_cast<long>(recon.size()) != test.size()) { throw DimensionError("score: reconstruction count differs from dataset"); }
  EvalResult r;
  for (long i = 0; i < test.size(); ++i) {
    auto const ref = magnitude(test.groundtruth(i));
    auto const img = magnitude(recon[static_cast<std::size_t>(i)]);
    r.psnr.push_back(psnr(img, ref));
    r.ssim.push_back(ssim(img, ref, test.info.h, test.info.w));
  }
  if (!r.psnr.empty()) {
    r.mean_psnr = std::accumulate(r.psnr.begin(), r.psnr.end(), 0.0) / static_cast<double>(r.psnr.size());
    r.mean_ssim = std::accumulate(r.ssim.begin(), r.ssim.end(), 0.0) / static_cast<double>(r.ssim.size());
  }
  return r;
}

auto evaluate(DenoiserParams const &params, Dataset const &test, DeqConfig const &cfg) -> EvalResult
{
  auto fps = reconstruct_all(params, test, cfg);
  std::vector<ComplexImage> recon;
  recon.reserve(fps.size());
  for (auto &f : fps) {
    recon.push_back(f.x_bar);
  }
  auto r = score(recon, test);
  for (auto const &f : fps) {
    r.iters.push_back(f.iters);
    r.converged.push_back(f.converged);
  }
  return r;
}

auto train(TrainConfig const &cfg, DenoiserParams init, Dataset const &data, Dataset const *validation,
           WeightVector const &wbar) -> TrainResult
{
  cfg.deq.validate();
  if (cfg.batch_size < 1) { throw ArgumentError("train: batch_size must be >= 1"); }
  if (cfg.epochs < 0) { throw ArgumentError("train: epochs must be >= 0"); }
  bool const self = cfg.arm != Arm::supervised;
  if (!self && !data.has_groundtruth()) { throw ArgumentError("train: supervised arm needs groundtruth"); }
  if (self && static_cast<long>(wbar.wbar.size()) != data.info.w) {
    throw DimensionError("train: weight vector length does not match dataset line count");
  }
  if (init.spec.h != data.info.h || init.spec.w != data.info.w) {
    throw DimensionError("train: denoiser size does not match dataset");
  }

  TrainResult out{std::move(init), {}};
  if (cfg.epochs == 0 || data.size() == 0) { return out; }

  Rng rng{cfg.seed};
  AdamState adam;
  std::vector<long> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0L);
  auto const start = std::chrono::steady_clock::now();

  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) { std::shuffle(order.begin(), order.end(), rng); }
    EpochLog entry;
    entry.epoch = epoch;
    entry.arm = cfg.arm;
    double loss_sum = 0.0;
    // locked only while gradients are formed; validation scoring below may read groundtruth
    std::optional<GroundtruthLock> lock;
    if (self) { lock.emplace(data); }
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t const b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::vector<double> grad(out.params.theta.size(), 0.0);
      for (std::size_t b = b0; b < b1; ++b) {
        long const i = order[b];
        auto const &pair = data.pairs[static_cast<std::size_t>(i)];
        auto const r = self ? jfb_self(out.params, pair, data.coils, wbar, cfg.deq)
                            : jfb_sup(out.params, pair.y, pair.mask, data.coils, data.groundtruth(i), cfg.deq);
        if (!r.forward.converged) { ++entry.nonconverged; }
        loss_sum += r.loss;
        for (std::size_t k = 0; k < grad.size(); ++k) {
          grad[k] += r.grad[k];
        }
      }
      double const inv = 1.0 / static_cast<double>(b1 - b0);
      for (auto &g : grad) {
        g *= inv;
      }
      adam_step(adam, out.params.theta, grad, cfg.adam);
      if (cfg.spectral_norm) { out.params = spectral_normalize(std::move(out.params), cfg.sn); }
    }
    lock.reset();
    entry.loss = loss_sum / static_cast<double>(data.size());
    entry.val_psnr = std::numeric_limits<double>::quiet_NaN();
    entry.val_ssim = std::numeric_limits<double>::quiet_NaN();
    if (validation && validation->size() > 0) {
      auto const ev = evaluate(out.params, *validation, cfg.deq);
      entry.val_psnr = ev.mean_psnr;
      entry.val_ssim = ev.mean_ssim;
    }
    entry.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.log.push_back(entry);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty()) {
      save_checkpoint(cfg.checkpoint_dir / ("epoch_" + std::to_string(epoch)), out.params);
    }
  }
  return out;
}

void write_metrics_csv(std::filesystem::path const &path, std::vector<EpochLog> const &log)
{
  std::ofstream out{path, std::ios::trunc};
  if (!out) { throw FormatError("cannot write '" + path.string() + "'"); }
  out << "epoch,arm,loss,val_psnr,val_ssim,wallclock_s\n";
  char buf[256];
  for (auto const &e : log) {
    std::snprintf(buf, sizeof buf, "%ld,%s,%.10g,%.6f,%.6f,%.3f\n", e.epoch, to_string(e.arm), e.loss, e.val_psnr,
                  e.val_ssim, e.wallclock_s);
    out << buf;
  }
}

} // namespace deqmri
