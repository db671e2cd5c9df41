#pragma once

// Multi-coil Cartesian MRI operators. A = [F S_1; ...; F S_c] with F the
// unitary, centred 2-D DFT: index k of either axis holds frequency
// k - floor(n/2). Masks select k_y lines (columns) and broadcast over k_x and
// coils, so with normalised coils A^H A = I.

#include "deqmri/sampling.hpp"
#include "deqmri/types.hpp"

#include <vector>

namespace deqmri {

// (coils, h, w) k-space. Entries on lines outside the producing mask are exact zeros.
struct KSpace
{
  long coils = 0;
  long h = 0;
  long w = 0;
  std::vector<Cx> data;
  long mask_id = -1;

  KSpace() = default;
  KSpace(long c, long h_, long w_)
    : coils{c}
    , h{h_}
    , w{w_}
    , data(static_cast<std::size_t>(c * h_ * w_))
  {
  }

  auto plane(long c) -> Cx * { return data.data() + c * h * w; }
  auto plane(long c) const -> Cx const * { return data.data() + c * h * w; }
  auto operator()(long c, long r, long k) -> Cx & { return data[static_cast<std::size_t>((c * h + r) * w + k)]; }
  auto operator()(long c, long r, long k) const -> Cx const &
  {
    return data[static_cast<std::size_t>((c * h + r) * w + k)];
  }
};

struct CoilSensitivities
{
  long coils = 0;
  long h = 0;
  long w = 0;
  std::vector<Cx> maps;

  auto plane(long c) const -> Cx const * { return maps.data() + c * h * w; }
};

// Scale maps pointwise so sum_c |S_c|^2 == 1. Pixels where every map vanishes become coil 0 = 1.
void normalize_coils(CoilSensitivities &s);

// max over pixels of |sum_c |S_c|^2 - 1|
auto coil_normalization_error(CoilSensitivities const &s) -> double;

enum class WeightMode
{
  exact,
  empirical
};

auto to_string(WeightMode m) -> char const *;
auto parse_weight_mode(std::string const &s) -> WeightMode;

// Per-line diagonal of the average weighting matrix.
struct WeightVector
{
  std::vector<double> wbar;
  WeightMode mode = WeightMode::exact;
};

// All-ones weights (the unweighted loss).
auto unit_weight(long w) -> WeightVector;

// Unitary centred 2-D DFT of one (h, w) plane, in place.
void fft2c(Cx *data, long h, long w);
void ifft2c(Cx *data, long h, long w);

auto forward_op(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &m) -> KSpace;
auto adjoint_op(KSpace const &y, CoilSensitivities const &s, SamplingMask const &m) -> ComplexImage;

// A^H M^T (M A x - y), the gradient of 0.5 ||y - M A x||^2.
auto data_fidelity_grad(ComplexImage const &x, KSpace const &y, CoilSensitivities const &s, SamplingMask const &m)
  -> ComplexImage;

// Result of a line-weighted residual: value = 0.5 sum_k weight_k |(M A x - y)_k|^2,
// grad = A^H M^T diag(weight) (M A x - y).
struct WeightedResidual
{
  double value = 0.0;
  ComplexImage grad;
};

auto weighted_residual(ComplexImage const &x, KSpace const &y, CoilSensitivities const &s, SamplingMask const &m,
                       std::vector<double> const &line_weight) -> WeightedResidual;

// A^H M^T diag(line_weight) M A x
auto weighted_normal_op(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &m,
                        std::vector<double> const &line_weight) -> ComplexImage;

// Exact: line-inclusion probabilities of the family distribution.
// Empirical: inclusion frequencies over the supplied draws (at least one).
auto build_weight(MaskFamily const &family, WeightMode mode, std::vector<SamplingMask> const &draws = {})
  -> WeightVector;

// Diagonal of W = M' Wbar (M' Wbar)^T laid out over all w lines: wbar_k^2 on
// sampled lines, 0 elsewhere.
auto subsample_weight(WeightVector const &wbar, SamplingMask const &m) -> std::vector<double>;

// <a, b> = sum conj(a) b over all coils and entries.
auto inner(KSpace const &a, KSpace const &b) -> Cx;
auto norm(KSpace const &a) -> double;

} // namespace deqmri
