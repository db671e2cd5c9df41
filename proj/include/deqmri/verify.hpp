#pragma once

// Numerical checks of the operator identities the self-supervised loss rests
// on: adjointness, E[(M'A)^H W M'A] = I, and equality of the family-averaged
// self-supervised JFB update with the supervised one.

#include "deqmri/datagen.hpp"
#include "deqmri/deq.hpp"
#include "deqmri/linops.hpp"

#include <string>
#include <utility>
#include <vector>

namespace deqmri {

struct VerificationReport
{
  std::string name;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string context;
  std::vector<std::pair<std::string, double>> details;
};

auto make_report(std::string name, double discrepancy, double tolerance, std::string context) -> VerificationReport;

// Dot-product test and full-mask round trip on one random instance; the
// discrepancy is the larger of the two relative errors.
auto verify_adjoint(long h, long w, long coils, Rng &rng, double tolerance = 1e-10) -> VerificationReport;

// ||E[(M'A)^H W M'A] - I||_F / sqrt(n) with the expectation enumerated over
// the family and applied to every pixel basis image (never materialised).
auto verify_weighted_expectation(MaskFamily const &family, WeightVector const &wbar, CoilSensitivities const &s,
                  double tolerance = 1e-10) -> VerificationReport;

// One reconstruction instance for the JFB equivalence check.
struct JfbSample
{
  ComplexImage x;
  KSpace y;
  SamplingMask mask;
};

// Relative L2 gap between the self-supervised update averaged over every
// family mask M' (noise-free y') and the supervised update, max over samples.
auto verify_jfb_exact(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                           CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                           DeqConfig const &cfg, double tolerance = 1e-8) -> VerificationReport;

// Per-sample discrepancies behind verify_jfb_exact.
auto jfb_exact_gaps(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                         CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                         DeqConfig const &cfg) -> std::vector<double>;

struct MonteCarloConfig
{
  std::vector<long> draws{100, 1000, 10000};
  long repeats = 32; // independent estimates per draw count; RMS is reported
  double sigma = 0.01;
  double ratio_lo = 0.2;
  double ratio_hi = 0.5;
  std::uint64_t seed = 0;
};

struct MonteCarloPoint
{
  long draws = 0;
  double rms_discrepancy = 0.0;
  double reference = 0.0; // rms at the first count scaled by 1/sqrt(N/N0)
};

// Averages over N random (M', e') draws. The self-supervised update is linear
// in dl/dx_bar, so the N residual images are summed in k-space and pushed
// through one adjoint and one parameter VJP; `jfb_mc_direct` averages N
// full jfb_self_at evaluations instead and is used to cross-check this path.
auto verify_jfb_mc(DenoiserParams const &params, std::vector<JfbSample> const &samples,
                        CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                        DeqConfig const &cfg, MonteCarloConfig const &mc) -> std::pair<VerificationReport, std::vector<MonteCarloPoint>>;

// Mean self-supervised update over `draws` random (M', e') for one sample, both ways.
auto jfb_mc_mean(DenoiserParams const &params, ComplexImage const &x_bar, JfbSample const &sample,
                      CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                      DeqConfig const &cfg, long draws, double sigma, Rng &rng) -> GradVector;
auto jfb_mc_direct(DenoiserParams const &params, ComplexImage const &x_bar, JfbSample const &sample,
                        CoilSensitivities const &s, MaskFamily const &family, WeightVector const &wbar,
                        DeqConfig const &cfg, long draws, double sigma, Rng &rng) -> GradVector;

// Random reconstruction instances: phantoms from `seed`, one mask draw each, noise sigma on y.
auto make_jfb_samples(long count, long h, long w, CoilSensitivities const &s, MaskFamily const &family,
                          double sigma, std::uint64_t seed) -> std::vector<JfbSample>;

auto relative_gap(std::vector<double> const &a, std::vector<double> const &b) -> double;

} // namespace deqmri
