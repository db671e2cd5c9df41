#include "deqmri/suites.hpp"

#include "deqmri/datagen.hpp"
#include "deqmri/denoiser.hpp"
#include "deqmri/types.hpp"

#include <cmath>
#include <cstdio>

namespace deqmri {

namespace {

auto adjoint_suite(SuiteOptions const &opt) -> std::vector<VerificationReport>
{
  Rng rng{derive_seed(opt.seed, 0xad)};
  std::uniform_int_distribution<long> side{8, 64}, coils{1, 4};
  std::vector<VerificationReport> out;
  for (int i = 0; i < 50; ++i) {
    long const h = side(rng), w = side(rng), c = coils(rng);
    auto r = verify_adjoint(h, w, c, rng);
    r.name = "adjoint[" + std::to_string(i) + "]";
    out.push_back(std::move(r));
  }
  return out;
}

auto expectation_suite(SuiteOptions const &opt) -> std::vector<VerificationReport>
{
  std::vector<VerificationReport> out;
  for (long R : {2L, 4L}) {
    for (long w : {8L, 16L, 32L, 64L}) {
      for (bool with_acs : {false, true}) {
        long const acs = with_acs ? std::max(1L, w / R / 2) : 0;
        auto const fam = make_family(w, R, acs, opt.family);
        long const h = std::min(w, 16L);
        auto const sc = simulate_coils(h, w, 3);
        auto rep = verify_weighted_expectation(fam, build_weight(fam, WeightMode::exact), sc);
        rep.name = "expectation[R=" + std::to_string(R) + ",w=" + std::to_string(w) + ",acs=" + std::to_string(acs) + "]";
        out.push_back(std::move(rep));
      }
    }
  }
  // without the weight each line is seen half the time: E = I / 2
  auto const fam = make_family(8, 2, 0, Variant::full);
  Cx const one{1.0, 0.0};
  CoilSensitivities unit;
  unit.coils = 1;
  unit.h = 8;
  unit.w = 8;
  unit.maps.assign(64, one);
  auto const ctl = verify_weighted_expectation(fam, unit_weight(8), unit);
  char buf[96];
  std::snprintf(buf, sizeof buf, "R=2 no ACS, W=I; discrepancy %.17g, expected 0.5", ctl.discrepancy);
  auto rep = make_report("expectation-unweighted-control", std::abs(ctl.discrepancy - 0.5), 1e-10, buf);
  rep.details.emplace_back("discrepancy", ctl.discrepancy);
  out.push_back(std::move(rep));
  return out;
}

auto jfb_coils() -> CoilSensitivities { return simulate_coils(16, 16, 4); }

auto jfb_exact_suite(SuiteOptions const &opt) -> std::vector<VerificationReport>
{
  auto const s = jfb_coils();
  auto const fam = make_family(16, 4, 2, opt.family);
  auto const wbar = build_weight(fam, WeightMode::exact);
  DeqConfig const cfg;
  std::vector<VerificationReport> out;
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto const p = spectral_normalize(init_params(DenoiserSpec::standard(16, 16, 3, 8), derive_seed(opt.seed, 100 + i), 0.5));
    auto const samples = make_jfb_samples(1, 16, 16, s, fam, 0.0, derive_seed(opt.seed, i));
    auto rep = verify_jfb_exact(p, samples, s, fam, wbar, cfg);
    rep.name = "jfb-exact[" + std::to_string(i) + "]";
    out.push_back(std::move(rep));
  }
  return out;
}

auto jfb_mc_suite(SuiteOptions const &opt) -> std::vector<VerificationReport>
{
  auto const s = jfb_coils();
  auto const fam = make_family(16, 4, 2, opt.family);
  auto const p = spectral_normalize(init_params(DenoiserSpec::standard(16, 16, 3, 8), derive_seed(opt.seed, 200), 0.5));
  auto const samples = make_jfb_samples(2, 16, 16, s, fam, 0.01, derive_seed(opt.seed, 201));
  MonteCarloConfig mc;
  mc.draws = {100, 1000, 10000};
  mc.repeats = opt.mc_repeats;
  mc.sigma = 0.01;
  mc.seed = derive_seed(opt.seed, 202);
  auto [rep, pts] = verify_jfb_mc(p, samples, s, fam, build_weight(fam, WeightMode::exact), DeqConfig{}, mc);
  return {rep};
}

} // namespace

auto suite_names() -> std::vector<std::string> const &
{
  static std::vector<std::string> const names{"adjoint", "expectation", "jfb-exact", "jfb-mc"};
  return names;
}

auto run_suite(std::string const &name, SuiteOptions const &opt) -> std::vector<VerificationReport>
{
  if (name == "all") {
    std::vector<VerificationReport> out;
    for (auto const &n : suite_names()) {
      auto r = run_suite(n, opt);
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }
  if (name == "adjoint") { return adjoint_suite(opt); }
  if (name == "expectation") { return expectation_suite(opt); }
  if (name == "jfb-exact") { return jfb_exact_suite(opt); }
  if (name == "jfb-mc") { return jfb_mc_suite(opt); }
  throw ArgumentError("unknown suite '" + name + "' (adjoint, expectation, jfb-exact, jfb-mc, all)");
}

} // namespace deqmri
