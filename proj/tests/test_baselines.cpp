#include "doctest.h"
#include "deqmri/baselines.hpp"
#include "deqmri/metrics.hpp"
#include "support.hpp"

#include <Eigen/Dense>

using namespace deqmri;
using namespace testing;

TEST_CASE("zero-filled reconstruction")
{
  Rng rng{1};
  auto const s = rand_coils(16, 16, 3, rng);
  auto const x = rand_image(16, 16, rng);

  CHECK(rel(zero_filled(forward_op(x, s, full_mask(16)), full_mask(16), s), x) < 1e-12);
  CHECK(norm(zero_filled(KSpace(3, 16, 16), full_mask(16), s)) == 0.0);

  SUBCASE("equispaced R=4 aliasing of an impulse")
  {
    auto const fam = make_family(16, 4, 0, Variant::full);
    auto const one = unit_coil(16, 16);
    ComplexImage imp(16, 16);
    imp(5, 3) = 1.0;
    auto const zf = zero_filled(forward_op(imp, one, fam.members[0]), fam.members[0], one);
    // lines every 4th k_y column: replicas every 16/4 = 4 columns, each with amplitude 1/4
    for (long r = 0; r < 16; ++r) {
      for (long c = 0; c < 16; ++c) {
        double const expect = (r == 5 && (c - 3 + 16) % 4 == 0) ? 0.25 : 0.0;
        CHECK(std::abs(zf(r, c)) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("TV norm")
{
  ComplexImage x(4, 4);
  CHECK(tv_norm(x) == 0.0);
  for (auto &v : x.data) {
    v = Cx{0.3, -0.2};
  }
  CHECK(tv_norm(x) == 0.0);
  x(1, 1) = Cx{1.3, -0.2};
  // four differences touch the changed pixel, each of size 1
  CHECK(tv_norm(x) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("TV reconstruction")
{
  auto const s = simulate_coils(32, 32, 4);
  auto const x = generate_phantom(5, 32, 32).image;
  auto const fam = make_family(32, 4, 4, Variant::full);
  auto const &m = fam.members[1];
  Rng rng{2};
  auto y = forward_op(x, s, m);
  add_measurement_noise(y, m, 0.01, rng);

  SUBCASE("objective is non-increasing")
  {
    TvConfig cfg;
    cfg.tau = 0.02;
    cfg.iters = 60;
    auto const r = tv_reconstruct(y, m, s, cfg);
    REQUIRE(r.objective.size() == 61);
    for (std::size_t k = 1; k < r.objective.size(); ++k) {
      CHECK(r.objective[k] <= r.objective[k - 1] + 1e-8);
    }
    CHECK(r.objective.back() == doctest::Approx(tv_objective(r.image, y, m, s, cfg.tau)).epsilon(1e-12));
  }
  SUBCASE("tau = 0 converges to the least-squares optimum")
  {
    // small dense problem: build M A column by column and solve least squares with Eigen
    long const n = 12;
    auto const s2 = rand_coils(n, n, 4, rng);
    auto const f2 = make_family(n, 2, 1, Variant::full); // 4 coils x 6+ lines: overdetermined
    auto const &m2 = f2.members[1];
    auto y2 = forward_op(rand_image(n, n, rng), s2, m2);
    add_measurement_noise(y2, m2, 0.05, rng);
    long const rows = static_cast<long>(y2.data.size());
    Eigen::MatrixXcd A(rows, n * n);
    for (long j = 0; j < n * n; ++j) {
      ComplexImage e(n, n);
      e.data[static_cast<std::size_t>(j)] = 1.0;
      auto const col = forward_op(e, s2, m2);
      for (long i = 0; i < rows; ++i) {
        A(i, j) = col.data[static_cast<std::size_t>(i)];
      }
    }
    Eigen::VectorXcd b(rows);
    for (long i = 0; i < rows; ++i) {
      b(i) = y2.data[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXcd const xs = A.completeOrthogonalDecomposition().solve(b);
    double const best = 0.5 * (A * xs - b).squaredNorm();

    TvConfig cfg;
    cfg.tau = 0.0;
    cfg.iters = 400;
    auto const r = tv_reconstruct(y2, m2, s2, cfg);
    CHECK(best > 0.0);
    CHECK(r.objective.front() > best * (1 + 1e-3));
    CHECK(std::abs(r.objective.back() - best) <= 1e-8 * best);
  }
  SUBCASE("large tau flattens the image")
  {
    TvConfig cfg;
    cfg.tau = 50.0;
    cfg.iters = 100;
    cfg.inner_iters = 100;
    auto const r = tv_reconstruct(y, m, s, cfg);
    auto const zf = zero_filled(y, m, s);
    CHECK(tv_norm(r.image) < 0.02 * tv_norm(zf));
  }
  SUBCASE("TV beats zero-filled")
  {
    TvConfig cfg;
    cfg.tau = 0.01;
    cfg.iters = 100;
    auto const r = tv_reconstruct(y, m, s, cfg);
    auto const ref = magnitude(x);
    double const p_tv = psnr(magnitude(r.image), ref);
    double const p_zf = psnr(magnitude(zero_filled(y, m, s)), ref);
    MESSAGE("TV " << p_tv << " dB, zero-filled " << p_zf << " dB");
    CHECK(p_tv > p_zf);
  }
  SUBCASE("invalid configuration")
  {
    TvConfig cfg;
    cfg.tau = -1.0;
    CHECK_THROWS_AS(tv_reconstruct(y, m, s, cfg), ArgumentError);
    cfg = {};
    cfg.inner_iters = 0;
    CHECK_THROWS_AS(tv_reconstruct(y, m, s, cfg), ArgumentError);
  }
}

TEST_CASE("TV grid search picks the best tau")
{
  DatasetSpec ds;
  ds.n_pairs = 2;
  ds.h = 32;
  ds.w = 32;
  ds.coils = 2;
  ds.R = 4;
  ds.acs = 4;
  ds.master_seed = 3;
  auto const d = generate_dataset(ds);
  TvConfig base;
  base.iters = 30;
  std::vector<double> const grid{1e-4, 3e-3, 1.0};
  auto const best = tv_grid_search(d, grid, base);
  double best_score = -1e9, chosen = 0;
  for (double tau : grid) {
    base.tau = tau;
    double tot = 0;
    for (long i = 0; i < d.size(); ++i) {
      auto const &p = d.pairs[static_cast<std::size_t>(i)];
      tot += psnr(magnitude(tv_reconstruct(p.y, p.mask, d.coils, base).image), magnitude(d.groundtruth(i)));
    }
    if (tot > best_score) {
      best_score = tot;
      chosen = tau;
    }
  }
  CHECK(best.tau == chosen);
  CHECK_THROWS_AS(tv_grid_search(d, {}, base), ArgumentError);
}
