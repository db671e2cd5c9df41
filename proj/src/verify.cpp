#include "deqmri/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deqmri {

namespace {

auto random_image(long h, long w, Rng &rng) -> ComplexImage
{
  std::normal_distribution<double> n{0.0, 1.0};
  ComplexImage x(h, w);
  for (auto &v : x.data) {
    double const re = n(rng);
    v = Cx{re, n(rng)};
  }
  return x;
}

auto random_coils(long h, long w, long coils, Rng &rng) -> CoilSensitivities
{
  std::normal_distribution<double> n{0.0, 1.0};
  CoilSensitivities s;
  s.coils = coils;
  s.h = h;
  s.w = w;
  s.maps.resize(static_cast<std::size_t>(coils * h * w));
  for (auto &v : s.maps) {
    double const re = n(rng);
    v = Cx{re, n(rng)};
  }
  normalize_coils(s);
  return s;
}

// Random line subset, never empty.
auto random_mask(long w, Rng &rng) -> SamplingMask
{
  std::bernoulli_distribution b{0.5};
  SamplingMask m;
  m.lines.resize(static_cast<std::size_t>(w));
  for (auto &l : m.lines) {
    l = b(rng) ? 1 : 0;
  }
  if (m.count() == 0) { m.lines[0] = 1; }
  return m;
}

void check_samples(std::vector<JfbSample> const &samples, CoilSensitivities const &s, char const *where)
{
  if (samples.empty()) { throw ArgumentError(std::string(where) + ": no samples"); }
  for (auto const &t : samples) {
    if (t.x.h != s.h || t.x.w != s.w || t.y.h != s.h || t.y.w != s.w || t.y.coils != s.coils) {
      throw DimensionError(std::string(where) + ": sample shape does not match coil maps");
    }
  }
}

auto fmt(double v) -> std::string
{
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << v;
  return o.str();
}

} // namespace

auto make_report(std::string name, double discrepancy, double tolerance, std::string context) -> VerificationReport
{
  VerificationReport r;
  r.name = std::move(name);
  r.discrepancy = discrepancy;
  r.tolerance = tolerance;
  r.passed = std::isfinite(discrepancy) && discrepancy <= tolerance;
  r.context = std::move(context);
  return r;
}

auto relative_gap(std::vector<double> const &a, std::vector<double> const &b) -> double
{
  if (a.size() != b.size()) { throw DimensionError("relative_gap: length mismatch"); }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  num = std::sqrt(num);
  den = std::sqrt(den);
  return den > 0.0 ? num / den : num;
}

auto verify_adjoint(long h, long w, long coils, Rng &rng, double tolerance) -> VerificationReport
{
  if (h < 1 || w < 1 || coils < 1) { throw ArgumentError("verify_adjoint: sizes must be positive"); }
  auto const s = random_coils(h, w, coils, rng);
  auto const m = random_mask(w, rng);
  auto const x = random_image(h, w, rng);

  std::normal_distribution<double> n{0.0, 1.0};
  KSpace y(coils, h, w);
  for (long c = 0; c < coils; ++c) {
    for (long r = 0; r < h; ++r) {
      for (long k = 0; k < w; ++k) {
        double const re = n(rng);
        double const im = n(rng);
        if (m.contains(k)) { y(c, r, k) = Cx{re, im}; }
      }
    }
  }

  Cx const lhs = inner(forward_op(x, s, m), y);
  Cx const rhs = inner(x, adjoint_op(y, s, m));
  double const dot_err = std::abs(lhs - rhs) / (norm(x) * norm(y));

  auto const full = full_mask(w);
  auto const back = adjoint_op(forward_op(x, s, full), s, full);
  double const trip_err = norm(back - x) / norm(x);

  auto rep = make_report("adjoint", std::max(dot_err, trip_err), tolerance,
                         std::to_string(h) + "x" + std::to_string(w) + ", " + std::to_string(coils) + " coils, " +
                           std::to_string(m.count()) + " lines");
  rep.details = {{"dot_product", dot_err}, {"round_trip", trip_err}};
  return rep;
}

auto verify_weighted_expectation(MaskFamily const &family, WeightVector const &wbar, CoilSensitivities const &s, double tolerance)
  -> VerificationReport
{
  if (family.size() == 0) { throw ArgumentError("verify_weighted_expectation: empty family"); }
  if (family.w != s.w || static_cast<long>(wbar.wbar.size()) != s.w) {
    throw DimensionError("verify_weighted_expectation: family, weights and coil maps disagree on width");
  }
  std::vector<std::vector<double>> weights;
  for (auto const &m : family.members) {
    weights.push_back(subsample_weight(wbar, m));
  }
  double const p = 1.0 / static_cast<double>(family.size());
  long const n = s.h * s.w;
  double sq = 0.0;
  ComplexImage e(s.h, s.w);
  for (long i = 0; i < n; ++i) {
    std::fill(e.data.begin(), e.data.end(), Cx{});
    e.data[static_cast<std::size_t>(i)] = 1.0;
    ComplexImage col(s.h, s.w);
    for (long j = 0; j < family.size(); ++j) {
      auto const t = weighted_normal_op(e, s, family.members[static_cast<std::size_t>(j)],
                                        weights[static_cast<std::size_t>(j)]);
      for (long q = 0; q < n; ++q) {
        col.data[static_cast<std::size_t>(q)] += p * t.data[static_cast<std::size_t>(q)];
      }
    }
    col.data[static_cast<std::size_t>(i)] -= 1.0;
    double const c = norm(col);
    sq += c * c;
  }
  double const d = std::sqrt(sq / static_cast<double>(n));
  return make_report("expectation", d, tolerance,
                     std::string(to_string(family.variant)) + " family, R=" + std::to_string(family.R) +
                       ", acs=" + std::to_string(family.acs) + ", " + std::to_string(family.size()) + " masks, " +
                       to_string(wbar.mode) + " weights");
}

auto make_jfb_samples(long count, long h, long w, CoilSensitivities const &s, MaskFamily const &family,
                          double sigma, std::uint64_t seed) -> std::vector<JfbSample>
{
  if (count < 1) { throw ArgumentError("make_jfb_samples: count must be >= 1"); }
  if (s.h != h || s.w != w || family.w != w) { throw DimensionError("make_jfb_samples: shape mismatch"); }
  std::vector<JfbSample> out;
  for (long i = 0; i < count; ++i) {
    Rng rng{derive_seed(seed, static_cast<std::uint64_t>(i))};
    JfbSample t;
    t.x = generate_phantom(derive_seed(seed ^ 0x7068616eULL, static_cast<std::uint64_t>(i)), h, w).image;
    t.mask = draw_mask(family, rng);
    t.y = forward_op(t.x, s, t.mask);
    add_measurement_noise(t.y, t.mask, sigma, rng);
    out.push_back(std::move(t));
  }
  return out;
}

auto jfb_exact_gaps(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                         CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                         DeqConfig const &cfg) -> std::vector<double>
{
  check_samples(samples, s, "jfb_exact_gaps");
  if (family.size() == 0) { throw ArgumentError("jfb_exact_gaps: empty family"); }
  std::vector<double> gaps;
  for (auto const &t : samples) {
    auto const fp = forward_fixed_point(params, t.y, t.mask, s, cfg);
    auto const sup = jfb_sup_at(params, fp.x_bar, t.y, t.mask, s, t.x, cfg).first;
    GradVector mean(sup.size(), 0.0);
    TrainingPair pair;
    pair.y = t.y;
    pair.mask = t.mask;
    for (auto const &mp : family.members) {
      pair.mask_prime = mp;
      pair.y_prime = forward_op(t.x, s, mp);
      auto const g = jfb_self_at(params, fp.x_bar, pair, s, subsample_weight(wbar, mp), cfg).first;
      for (std::size_t i = 0; i < g.size(); ++i) {
        mean[i] += g[i];
      }
    }
    for (auto &v : mean) {
      v /= static_cast<double>(family.size());
    }
    gaps.push_back(relative_gap(mean, sup));
  }
  return gaps;
}

auto verify_jfb_exact(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                           CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                           DeqConfig const &cfg, double tolerance) -> VerificationReport
{
  auto const gaps = jfb_exact_gaps(params, samples, s, family, wbar, cfg);
  double const worst = *std::max_element(gaps.begin(), gaps.end());
  auto rep = make_report("jfb-exact", worst, tolerance,
                         std::string(to_string(family.variant)) + " family, R=" + std::to_string(family.R) + ", " +
                           std::to_string(samples.size()) + " samples, exact expectation over " +
                           std::to_string(family.size()) + " masks");
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    rep.details.emplace_back("sample_" + std::to_string(i), gaps[i]);
  }
  return rep;
}

auto jfb_mc_mean(DenoiserParams const &params, ComplexImage const &x_bar, JfbSample const &sample,
                      CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                      DeqConfig const &cfg, long draws, double sigma, Rng &rng) -> GradVector
{
  if (draws < 1) { throw ArgumentError("jfb_mc_mean: draws must be >= 1"); }
  // y' - M'A x_bar = -(M'A (x_bar - x) - e'), so only A(x_bar - x) is needed.
  auto const full = full_mask(s.w);
  auto const ad = forward_op(x_bar - sample.x, s, full);
  std::vector<std::vector<double>> weights;
  for (auto const &m : family.members) {
    weights.push_back(subsample_weight(wbar, m));
  }
  KSpace acc(s.coils, s.h, s.w);
  KSpace e(s.coils, s.h, s.w);
  for (long d = 0; d < draws; ++d) {
    long const j = draw_index(family, rng);
    auto const &m = family.members[static_cast<std::size_t>(j)];
    auto const &lw = weights[static_cast<std::size_t>(j)];
    std::fill(e.data.begin(), e.data.end(), Cx{});
    add_measurement_noise(e, m, sigma, rng);
    for (long c = 0; c < s.coils; ++c) {
      for (long r = 0; r < s.h; ++r) {
        for (long k = 0; k < s.w; ++k) {
          if (!m.contains(k)) { continue; }
          acc(c, r, k) += lw[static_cast<std::size_t>(k)] * (ad(c, r, k) - e(c, r, k));
        }
      }
    }
  }
  auto grad_x = adjoint_op(acc, s, full);
  grad_x = (1.0 / static_cast<double>(draws)) * std::move(grad_x);
  auto const sx = gradient_step(x_bar, sample.y, sample.mask, s, cfg.gamma);
  auto g = param_vjp(params, sx, grad_x);
  for (auto &v : g) {
    v *= cfg.alpha;
  }
  return g;
}

auto jfb_mc_direct(DenoiserParams const &params, ComplexImage const &x_bar, JfbSample const &sample,
                        CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                        DeqConfig const &cfg, long draws, double sigma, Rng &rng) -> GradVector
{
  if (draws < 1) { throw ArgumentError("jfb_mc_direct: draws must be >= 1"); }
  TrainingPair pair;
  pair.y = sample.y;
  pair.mask = sample.mask;
  GradVector mean;
  for (long d = 0; d < draws; ++d) {
    pair.mask_prime = family.members[static_cast<std::size_t>(draw_index(family, rng))];
    pair.y_prime = forward_op(sample.x, s, pair.mask_prime);
    // same draw order as the fast path: noise into a zero buffer, then added
    KSpace e(s.coils, s.h, s.w);
    add_measurement_noise(e, pair.mask_prime, sigma, rng);
    for (std::size_t i = 0; i < e.data.size(); ++i) {
      pair.y_prime.data[i] += e.data[i];
    }
    auto const g = jfb_self_at(params, x_bar, pair, s, subsample_weight(wbar, pair.mask_prime), cfg).first;
    if (mean.empty()) { mean.assign(g.size(), 0.0); }
    for (std::size_t i = 0; i < g.size(); ++i) {
      mean[i] += g[i];
    }
  }
  for (auto &v : mean) {
    v /= static_cast<double>(draws);
  }
  return mean;
}

auto verify_jfb_mc(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                        CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                        DeqConfig const &cfg, MonteCarloConfig const &mc)
  -> std::pair<VerificationReport, std::vector<MonteCarloPoint>>
{
  check_samples(samples, s, "verify_jfb_mc");
  if (mc.draws.size() < 2) { throw ArgumentError("verify_jfb_mc: need at least two draw counts"); }
  if (mc.repeats < 1) { throw ArgumentError("verify_jfb_mc: repeats must be >= 1"); }
  for (std::size_t i = 0; i < mc.draws.size(); ++i) {
    if (mc.draws[i] < 1 || (i > 0 && mc.draws[i] <= mc.draws[i - 1])) {
      throw ArgumentError("verify_jfb_mc: draw counts must be positive and increasing");
    }
  }
  if (!(mc.ratio_lo > 0.0 && mc.ratio_lo < mc.ratio_hi)) {
    throw ArgumentError("verify_jfb_mc: bad ratio interval");
  }

  std::vector<ComplexImage> x_bars;
  std::vector<GradVector> sups;
  for (auto const &t : samples) {
    auto fp = forward_fixed_point(params, t.y, t.mask, s, cfg);
    sups.push_back(jfb_sup_at(params, fp.x_bar, t.y, t.mask, s, t.x, cfg).first);
    x_bars.push_back(std::move(fp.x_bar));
  }

  std::vector<MonteCarloPoint> points;
  for (std::size_t di = 0; di < mc.draws.size(); ++di) {
    double sq = 0.0;
    long cnt = 0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
      for (long rep = 0; rep < mc.repeats; ++rep) {
        Rng rng{derive_seed(mc.seed, (di * 1000003ULL + si) * 65537ULL + static_cast<std::uint64_t>(rep))};
        auto const mean =
          jfb_mc_mean(params, x_bars[si], samples[si], s, family, wbar, cfg, mc.draws[di], mc.sigma, rng);
        double const gap = relative_gap(mean, sups[si]);
        sq += gap * gap;
        ++cnt;
      }
    }
    MonteCarloPoint p;
    p.draws = mc.draws[di];
    p.rms_discrepancy = std::sqrt(sq / static_cast<double>(cnt));
    points.push_back(p);
  }
  for (auto &p : points) {
    p.reference = points.front().rms_discrepancy /
                  std::sqrt(static_cast<double>(p.draws) / static_cast<double>(points.front().draws));
  }

  // Each successive ratio must land in [lo, hi]. Expressed as a log distance
  // from the ideal 1/sqrt(N_i+1/N_i): inside the interval iff the distance is
  // within the nearer edge.
  double worst = 0.0, tol = INFINITY;
  std::string ctx;
  VerificationReport rep;
  for (std::size_t i = 1; i < points.size(); ++i) {
    double const ratio = points[i].rms_discrepancy / points[i - 1].rms_discrepancy;
    double const ideal = std::sqrt(static_cast<double>(points[i - 1].draws) / static_cast<double>(points[i].draws));
    double const lo = mc.ratio_lo * ideal * std::sqrt(10.0);
    double const hi = mc.ratio_hi * ideal * std::sqrt(10.0);
    worst = std::max(worst, std::abs(std::log(ratio / ideal)));
    tol = std::min({tol, std::log(ideal / lo), std::log(hi / ideal)});
    if (!ctx.empty()) { ctx += ", "; }
    ctx += "ratio " + std::to_string(points[i - 1].draws) + "->" + std::to_string(points[i].draws) + " = " +
           fmt(ratio);
    rep.details.emplace_back("ratio_" + std::to_string(points[i].draws), ratio);
  }
  for (auto const &p : points) {
    rep.details.emplace_back("rms_" + std::to_string(p.draws), p.rms_discrepancy);
  }
  auto base = make_report("jfb-mc", worst, tol,
                          std::to_string(samples.size()) + " samples x " + std::to_string(mc.repeats) +
                            " repeats; " + ctx);
  base.details = std::move(rep.details);
  return {std::move(base), std::move(points)};
}

} // namespace deqmri
