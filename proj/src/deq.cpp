#include "deqmri/deq.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <limits>

namespace deqmri {

void DeqConfig::validate() const
{
  if (!(alpha > 0.0 && alpha <= 1.0)) { throw ArgumentError("deq: alpha must lie in (0, 1]"); }
  if (!(gamma > 0.0)) { throw ArgumentError("deq: gamma must be positive"); }
  if (max_iters < 1) { throw ArgumentError("deq: max_iters must be >= 1"); }
  if (!(tol > 0.0)) { throw ArgumentError("deq: tol must be positive"); }
  if (anderson && (anderson->depth < 1 || !(anderson->mixing > 0.0) || anderson->ridge < 0.0)) {
    throw ArgumentError("deq: invalid Anderson settings");
  }
}

auto gradient_step(ComplexImage const &x, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
                   double gamma) -> ComplexImage
{
  auto g = data_fidelity_grad(x, y, s, mask);
  ComplexImage out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] -= gamma * g.data[i];
  }
  return out;
}

auto t_operator(DenoiserParams const &params, ComplexImage const &x, KSpace const &y, SamplingMask const &mask,
                CoilSensitivities const &s, DeqConfig const &cfg) -> ComplexImage
{
  auto const sx = gradient_step(x, y, mask, s, cfg.gamma);
  auto out = denoise(params, sx);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = cfg.alpha * out.data[i] + (1.0 - cfg.alpha) * sx.data[i];
  }
  return out;
}

namespace {

auto relative_change(ComplexImage const &next, ComplexImage const &prev) -> double
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < next.data.size(); ++i) {
    num += std::norm(next.data[i] - prev.data[i]);
    den += std::norm(prev.data[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

auto real_dot(ComplexImage const &a, ComplexImage const &b) -> double
{
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    acc += a.data[i].real() * b.data[i].real() + a.data[i].imag() * b.data[i].imag();
  }
  return acc;
}

// Type-II Anderson mixing over the last `depth` (x, T(x)) pairs.
class Anderson
{
public:
  explicit Anderson(AndersonConfig cfg)
    : cfg_{cfg}
  {
  }

  auto next(ComplexImage const &x, ComplexImage const &fx) -> ComplexImage
  {
    xs_.push_back(x);
    fs_.push_back(fx);
    gs_.push_back(fx - x);
    if (static_cast<long>(xs_.size()) > cfg_.depth) {
      xs_.pop_front();
      fs_.pop_front();
      gs_.pop_front();
    }
    long const m = static_cast<long>(xs_.size());
    if (m == 1) { return fx; }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (long i = 0; i < m; ++i) {
      H(0, i + 1) = H(i + 1, 0) = 1.0;
      for (long j = 0; j <= i; ++j) {
        double const v = real_dot(gs_[static_cast<std::size_t>(i)], gs_[static_cast<std::size_t>(j)]);
        H(i + 1, j + 1) = H(j + 1, i + 1) = v;
      }
    }
    // ridge relative to the Gram scale, otherwise it swamps the tiny residuals near convergence
    double const scale = H.block(1, 1, m, m).diagonal().maxCoeff();
    for (long i = 0; i < m; ++i) {
      H(i + 1, i + 1) += cfg_.ridge * scale;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs(0) = 1.0;
    Eigen::VectorXd sol = H.colPivHouseholderQr().solve(rhs);
    if (!sol.allFinite()) { return fx; }
    ComplexImage out(x.h, x.w);
    double const beta = cfg_.mixing;
    for (long i = 0; i < m; ++i) {
      double const a = sol(i + 1);
      auto const &xi = xs_[static_cast<std::size_t>(i)];
      auto const &fi = fs_[static_cast<std::size_t>(i)];
      for (std::size_t k = 0; k < out.data.size(); ++k) {
        out.data[k] += a * (beta * fi.data[k] + (1.0 - beta) * xi.data[k]);
      }
    }
    return out;
  }

private:
  AndersonConfig cfg_;
  std::deque<ComplexImage> xs_, fs_, gs_;
};

} // namespace

auto forward_fixed_point(DenoiserParams const &params, KSpace const &y, SamplingMask const &mask,
                         CoilSensitivities const &s, DeqConfig const &cfg) -> FixedPointResult
{
  cfg.validate();
  FixedPointResult res;
  ComplexImage x = adjoint_op(y, s, mask);
  std::optional<Anderson> mixer;
  if (cfg.anderson) { mixer.emplace(*cfg.anderson); }
  for (long k = 1; k <= cfg.max_iters; ++k) {
    auto fx = t_operator(params, x, y, mask, s, cfg);
    auto next = mixer ? mixer->next(x, fx) : std::move(fx);
    if (!is_finite(next)) { throw DivergenceError("forward_fixed_point: non-finite iterate at iteration " + std::to_string(k), k); }
    double const r = relative_change(next, x);
    res.residuals.push_back(r);
    res.iters = k;
    x = std::move(next);
    if (r <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && cfg.abort_on_nonconvergence) {
    throw DivergenceError("forward_fixed_point: no convergence within " + std::to_string(cfg.max_iters) +
                            " iterations (last residual " + std::to_string(res.residuals.back()) + ")",
                          res.iters);
  }
  res.x_bar = std::move(x);
  return res;
}

auto jfb_self_at(DenoiserParams const &params, ComplexImage const &x_bar, TrainingPair const &pair,
                 CoilSensitivities const &s, std::vector<double> const &line_weight, DeqConfig const &cfg)
  -> std::pair<GradVector, double>
{
  auto const r = weighted_residual(x_bar, pair.y_prime, s, pair.mask_prime, line_weight);
  auto const sx = gradient_step(x_bar, pair.y, pair.mask, s, cfg.gamma);
  auto g = param_vjp(params, sx, r.grad);
  for (auto &v : g) {
    v *= cfg.alpha;
  }
  return {std::move(g), r.value};
}

auto jfb_sup_at(DenoiserParams const &params, ComplexImage const &x_bar, KSpace const &y, SamplingMask const &mask,
                CoilSensitivities const &s, ComplexImage const &groundtruth, DeqConfig const &cfg)
  -> std::pair<GradVector, double>
{
  auto const err = x_bar - groundtruth;
  double const n = norm(err);
  auto const sx = gradient_step(x_bar, y, mask, s, cfg.gamma);
  auto g = param_vjp(params, sx, err);
  for (auto &v : g) {
    v *= cfg.alpha;
  }
  return {std::move(g), 0.5 * n * n};
}

auto jfb_self(DenoiserParams const &params, TrainingPair const &pair, CoilSensitivities const &s,
              WeightVector const &wbar, DeqConfig const &cfg) -> JfbResult
{
  JfbResult out;
  out.forward = forward_fixed_point(params, pair.y, pair.mask, s, cfg);
  auto [g, loss] = jfb_self_at(params, out.forward.x_bar, pair, s, subsample_weight(wbar, pair.mask_prime), cfg);
  out.grad = std::move(g);
  out.loss = loss;
  return out;
}

auto jfb_sup(DenoiserParams const &params, KSpace const &y, SamplingMask const &mask, CoilSensitivities const &s,
             ComplexImage const &groundtruth, DeqConfig const &cfg) -> JfbResult
{
  JfbResult out;
  out.forward = forward_fixed_point(params, y, mask, s, cfg);
  auto [g, loss] = jfb_sup_at(params, out.forward.x_bar, y, mask, s, groundtruth, cfg);
  out.grad = std::move(g);
  out.loss = loss;
  return out;
}

} // namespace deqmri
