#include "deqmri/baselines.hpp"
#include "deqmri/metrics.hpp"

#include <cmath>
#include <limits>

namespace deqmri {

auto zero_filled(KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s) -> ComplexImage
{
  return adjoint_op(y, s, mask);
}

namespace {

// Forward differences with circular wrap: dh[i,j] = x[i,j+1] - x[i,j], dv[i,j] = x[i+1,j] - x[i,j].
void grad_op(ComplexImage const &x, std::vector<Cx> &dh, std::vector<Cx> &dv)
{
  long const h = x.h, w = x.w;
  dh.resize(static_cast<std::size_t>(h * w));
  dv.resize(dh.size());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      dh[static_cast<std::size_t>(i * w + j)] = x(i, (j + 1) % w) - x(i, j);
      dv[static_cast<std::size_t>(i * w + j)] = x((i + 1) % h, j) - x(i, j);
    }
  }
}

// Adjoint of grad_op.
void grad_adjoint(std::vector<Cx> const &ph, std::vector<Cx> const &pv, ComplexImage &out)
{
  long const h = out.h, w = out.w;
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      auto at = [&](std::vector<Cx> const &p, long r, long c) { return p[static_cast<std::size_t>(r * w + c)]; };
      out(i, j) = at(ph, i, (j + w - 1) % w) - at(ph, i, j) + at(pv, (i + h - 1) % h, j) - at(pv, i, j);
    }
  }
}

// prox of lam * ||D z||_1 at v; dual fields are warm-started through ph/pv.
auto tv_prox(ComplexImage const &v, double lam, long iters, std::vector<Cx> &ph, std::vector<Cx> &pv) -> ComplexImage
{
  ComplexImage z(v.h, v.w);
  if (lam <= 0.0) { return v; }
  std::vector<Cx> dh, dv;
  double const step = 1.0 / (8.0 * lam);
  ComplexImage dtp(v.h, v.w);
  for (long it = 0; it < iters; ++it) {
    grad_adjoint(ph, pv, dtp);
    for (std::size_t k = 0; k < z.data.size(); ++k) {
      z.data[k] = v.data[k] - lam * dtp.data[k];
    }
    grad_op(z, dh, dv);
    for (std::size_t k = 0; k < ph.size(); ++k) {
      ph[k] += step * dh[k];
      pv[k] += step * dv[k];
      ph[k] /= std::max(1.0, std::abs(ph[k]));
      pv[k] /= std::max(1.0, std::abs(pv[k]));
    }
  }
  grad_adjoint(ph, pv, dtp);
  for (std::size_t k = 0; k < z.data.size(); ++k) {
    z.data[k] = v.data[k] - lam * dtp.data[k];
  }
  return z;
}

} // namespace

auto tv_norm(ComplexImage const &x) -> double
{
  std::vector<Cx> dh, dv;
  grad_op(x, dh, dv);
  double acc = 0.0;
  for (std::size_t k = 0; k < dh.size(); ++k) {
    acc += std::abs(dh[k]) + std::abs(dv[k]);
  }
  return acc;
}

auto tv_objective(ComplexImage const &x, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
                  double tau) -> double
{
  auto const r = weighted_residual(x, y, s, mask, std::vector<double>(static_cast<std::size_t>(x.w), 1.0));
  return r.value + tau * tv_norm(x);
}

auto tv_reconstruct(KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s, TvConfig const &cfg)
  -> TvResult
{
  if (!(cfg.tau >= 0.0) || !(cfg.step > 0.0) || cfg.iters < 0 || cfg.inner_iters < 1) {
    throw ArgumentError("tv_reconstruct: invalid configuration");
  }
  TvResult res;
  res.image = zero_filled(y, mask, s);
  auto &x = res.image;
  std::vector<double> ones(static_cast<std::size_t>(x.w), 1.0);
  auto const n = static_cast<std::size_t>(x.size());
  std::vector<Cx> ph(n), pv(n);
  double f = tv_objective(x, y, mask, s, cfg.tau);
  res.objective.push_back(f);
  for (long k = 1; k <= cfg.iters; ++k) {
    auto const r = weighted_residual(x, y, s, mask, ones);
    ComplexImage v = x;
    for (std::size_t i = 0; i < n; ++i) {
      v.data[i] -= cfg.step * r.grad.data[i];
    }
    long inner = cfg.inner_iters;
    bool accepted = false;
    for (int attempt = 0; attempt < 4 && !accepted; ++attempt) {
      auto hs = ph, vs = pv;
      auto cand = tv_prox(v, cfg.step * cfg.tau, inner, hs, vs);
      if (!is_finite(cand)) { throw DivergenceError("tv_reconstruct: non-finite iterate at iteration " + std::to_string(k), k); }
      double const fc = tv_objective(cand, y, mask, s, cfg.tau);
      if (fc <= f) {
        x = std::move(cand);
        f = fc;
        ph = std::move(hs);
        pv = std::move(vs);
        accepted = true;
      } else {
        inner *= 4;
      }
    }
    res.objective.push_back(f);
  }
  return res;
}

auto tv_grid_search(Dataset const &data, std::vector<double> const &grid, TvConfig base) -> TvConfig
{
  if (grid.empty()) { throw ArgumentError("tv_grid_search: empty grid"); }
  double best = -std::numeric_limits<double>::infinity();
  TvConfig chosen = base;
  for (double tau : grid) {
    base.tau = tau;
    double total = 0.0;
    for (long i = 0; i < data.size(); ++i) {
      auto const &p = data.pairs[static_cast<std::size_t>(i)];
      auto const rec = tv_reconstruct(p.y, p.mask, data.coils, base);
      total += psnr(magnitude(rec.image), magnitude(data.groundtruth(i)));
    }
    if (total > best) {
      best = total;
      chosen = base;
    }
  }
  return chosen;
}

} // namespace deqmri
