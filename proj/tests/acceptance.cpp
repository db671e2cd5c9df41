// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset. Exit status is 0 iff every criterion run passed.

#include "deqmri/baselines.hpp"
#include "deqmri/metrics.hpp"
#include "deqmri/suites.hpp"
#include "deqmri/trainer.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using namespace deqmri;
using namespace testing;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

auto seconds_since(Clock::time_point t0) -> double
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

auto fmt(char const *f, auto... args) -> std::string
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

auto all_passed(std::vector<VerificationReport> const &r) -> long
{
  long n = 0;
  for (auto const &x : r) {
    n += x.passed ? 1 : 0;
  }
  return n;
}

auto max_disc(std::vector<VerificationReport> const &r) -> double
{
  double m = 0.0;
  for (auto const &x : r) {
    m = std::max(m, x.discrepancy);
  }
  return m;
}

// ---- 1-4: operator identities ---------------------------------------------

auto adjoint() -> Outcome
{
  auto const t0 = Clock::now();
  auto const r = run_suite("adjoint", {});
  double const dt = seconds_since(t0);
  bool ok = r.size() == 50 && all_passed(r) == 50 && dt < 10.0;
  for (auto const &x : r) {
    ok = ok && x.tolerance <= 1e-10;
  }
  return {ok, fmt("%ld/%zu instances within 1e-10 (max %.2e), %.1f s of 10", all_passed(r), r.size(), max_disc(r), dt)};
}

auto expectation() -> Outcome
{
  auto const t0 = Clock::now();
  auto const r = run_suite("expectation", {});
  double const dt = seconds_since(t0);
  double control = -1.0, worst = 0.0;
  long ok_fam = 0, n_fam = 0;
  for (auto const &x : r) {
    if (x.name == "expectation-unweighted-control") {
      control = x.details.at(0).second;
    } else {
      ++n_fam;
      ok_fam += x.passed && x.tolerance <= 1e-10 ? 1 : 0;
      worst = std::max(worst, x.discrepancy);
    }
  }
  bool const ok = n_fam == 16 && ok_fam == n_fam && std::abs(control - 0.5) <= 1e-10 && dt < 30.0;
  return {ok, fmt("%ld/%ld full-rank families within 1e-10 (max %.2e); W=I control %.15f; %.1f s of 30", ok_fam, n_fam,
                  worst, control, dt)};
}

auto jfb_exact() -> Outcome
{
  auto const t0 = Clock::now();
  auto const full = run_suite("jfb-exact", {});
  SuiteOptions def;
  def.family = Variant::deficient;
  auto const bad = run_suite("jfb-exact", def);
  double const dt = seconds_since(t0);
  long broken = 0;
  double smallest = 1e300;
  for (auto const &x : bad) {
    broken += x.discrepancy > 1e-2 ? 1 : 0;
    smallest = std::min(smallest, x.discrepancy);
  }
  bool ok = full.size() == 10 && all_passed(full) == 10 && bad.size() == 10 && broken >= 9 && dt < 120.0;
  for (auto const &x : full) {
    ok = ok && x.tolerance <= 1e-8;
  }
  return {ok, fmt("full-rank %ld/10 within 1e-8 (max %.2e); rank-deficient %ld/10 above 1e-2 (min %.3f); %.1f s of 120",
                  all_passed(full), max_disc(full), broken, smallest, dt)};
}

auto jfb_mc() -> Outcome
{
  auto const t0 = Clock::now();
  auto const r = run_suite("jfb-mc", {});
  double const dt = seconds_since(t0);
  std::map<std::string, double> d;
  for (auto const &[k, v] : r.at(0).details) {
    d[k] = v;
  }
  double const r1 = d.at("ratio_1000"), r2 = d.at("ratio_10000");
  bool const shrinking = d.at("rms_1000") < d.at("rms_100") && d.at("rms_10000") < d.at("rms_1000");
  bool const ok = shrinking && r1 >= 0.2 && r1 <= 0.5 && r2 >= 0.2 && r2 <= 0.5 && dt < 300.0;
  return {ok, fmt("rms %.3e / %.3e / %.3e at N = 1e2 / 1e3 / 1e4; decade ratios %.3f, %.3f (ideal 0.316); %.1f s of 300",
                  d.at("rms_100"), d.at("rms_1000"), d.at("rms_10000"), r1, r2, dt)};
}

// ---- 5: gradients against finite differences ---------------------------------

struct GradInstance
{
  CoilSensitivities s;
  ComplexImage x;
  MaskFamily fam;
  SamplingMask mask, mask_prime;
  KSpace y, y_prime;
};

auto make_grad_instance(Rng &rng) -> GradInstance
{
  GradInstance t;
  t.s = rand_coils(8, 8, 2, rng);
  t.x = rand_image(8, 8, rng, 0.5);
  t.fam = make_family(8, 2, 1, Variant::full);
  t.mask = draw_mask(t.fam, rng);
  t.mask_prime = draw_mask(t.fam, rng);
  t.y = forward_op(t.x, t.s, t.mask);
  add_measurement_noise(t.y, t.mask, 0.05, rng);
  t.y_prime = forward_op(t.x, t.s, t.mask_prime);
  add_measurement_noise(t.y_prime, t.mask_prime, 0.05, rng);
  return t;
}

auto rel_err(std::vector<double> const &a, std::vector<double> const &b) -> double
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

auto gradients() -> Outcome
{
  auto const t0 = Clock::now();
  Rng rng{505};
  DeqConfig cfg;
  double worst_vjp = 0.0, worst_self = 0.0, worst_sup = 0.0;
  for (int k = 0; k < 20; ++k) {
    auto const t = make_grad_instance(rng);
    auto const p = rand_params(small_spec(8, 8), rng);

    auto const v = rand_image(8, 8, rng);
    auto const xin = rand_image(8, 8, rng);
    auto vjp_loss = [&](DenoiserParams const &q) {
      auto const f = denoise(q, xin);
      double acc = 0.0;
      for (std::size_t i = 0; i < f.data.size(); ++i) {
        acc += (std::conj(v.data[i]) * f.data[i]).real();
      }
      return acc;
    };
    worst_vjp = std::max(worst_vjp, rel_err(param_vjp(p, xin, v), fd_gradient(p, vjp_loss)));

    // x_bar frozen: z(theta) = x_bar + T_theta(x_bar) - T_theta0(x_bar)
    auto const wbar = build_weight(t.fam, WeightMode::exact);
    TrainingPair pair{t.y, t.mask, t.y_prime, t.mask_prime, {}};
    auto const self = jfb_self(p, pair, t.s, wbar, cfg);
    auto const &xb = self.forward.x_bar;
    auto const tb = t_operator(p, xb, t.y, t.mask, t.s, cfg);
    auto z_of = [&](DenoiserParams const &q) { return xb + (t_operator(q, xb, t.y, t.mask, t.s, cfg) - tb); };
    auto self_loss = [&](DenoiserParams const &q) {
      auto const r = forward_op(z_of(q), t.s, t.mask_prime);
      double acc = 0.0;
      for (long c = 0; c < r.coils; ++c) {
        for (long row = 0; row < r.h; ++row) {
          for (long col = 0; col < r.w; ++col) {
            if (!t.mask_prime.contains(col)) { continue; }
            double const wk = wbar.wbar[static_cast<std::size_t>(col)];
            acc += wk * wk * std::norm(r(c, row, col) - t.y_prime(c, row, col));
          }
        }
      }
      return 0.5 * acc;
    };
    worst_self = std::max(worst_self, rel_err(self.grad, fd_gradient(p, self_loss)));

    auto const sup = jfb_sup(p, t.y, t.mask, t.s, t.x, cfg);
    auto const &xs = sup.forward.x_bar;
    auto const ts = t_operator(p, xs, t.y, t.mask, t.s, cfg);
    auto sup_loss = [&](DenoiserParams const &q) {
      auto const z = xs + (t_operator(q, xs, t.y, t.mask, t.s, cfg) - ts);
      double acc = 0.0;
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        acc += std::norm(z.data[i] - t.x.data[i]);
      }
      return 0.5 * acc;
    };
    worst_sup = std::max(worst_sup, rel_err(sup.grad, fd_gradient(p, sup_loss)));
  }
  double const dt = seconds_since(t0);
  bool const ok = worst_vjp <= 1e-5 && worst_self <= 1e-5 && worst_sup <= 1e-5 && dt < 60.0;
  return {ok, fmt("20 instances, max relative error: param_vjp %.2e, self-supervised JFB %.2e, supervised JFB %.2e; %.1f s of 60",
                  worst_vjp, worst_self, worst_sup, dt)};
}

// ---- 6-8: desk benchmark ------------------------------------------------------

struct BenchSetup
{
  long train = 50, val = 10, test = 20;
  long coils = 4, acs = 4;
  double sigma = 0.01;
  long epochs = 30, batch = 2;
  double lr = 1e-3;
  long depth = 3, channels = 16, kernel = 3;
  double beta = 10.0;
};

struct Bench
{
  BenchSetup setup;
  double zf = 0.0, tv = 0.0, tv_tau = 0.0;
  std::map<Arm, double> psnr;
  std::map<Arm, DenoiserParams> params;
  double seconds = 0.0;
};

auto bench_data(BenchSetup const &b, long n, std::uint64_t seed) -> Dataset
{
  DatasetSpec d;
  d.n_pairs = n;
  d.h = 32;
  d.w = 32;
  d.coils = b.coils;
  d.R = 4;
  d.acs = b.acs;
  d.sigma = b.sigma;
  d.master_seed = seed;
  return generate_dataset(d);
}

auto run_bench() -> Bench const &
{
  static std::optional<Bench> cache;
  if (cache) { return *cache; }
  Bench out;
  auto const t0 = Clock::now();
  auto const &b = out.setup;
  auto const train_set = bench_data(b, b.train, 7001);
  auto const val_set = bench_data(b, b.val, 7002);
  auto const test_set = bench_data(b, b.test, 7003);

  std::vector<ComplexImage> zf;
  for (auto const &p : test_set.pairs) {
    zf.push_back(zero_filled(p.y, p.mask, test_set.coils));
  }
  out.zf = score(zf, test_set).mean_psnr;
  TvConfig tvc;
  tvc.iters = 100;
  auto const best = tv_grid_search(val_set, {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2}, tvc);
  out.tv_tau = best.tau;
  std::vector<ComplexImage> tv;
  for (auto const &p : test_set.pairs) {
    tv.push_back(tv_reconstruct(p.y, p.mask, test_set.coils, best).image);
  }
  out.tv = score(tv, test_set).mean_psnr;
  std::printf("  benchmark: zero-filled %.3f dB, TV (tau %g) %.3f dB\n", out.zf, out.tv_tau, out.tv);
  std::fflush(stdout);

  auto spec = DenoiserSpec::standard(32, 32, b.depth, b.channels, b.kernel);
  spec.beta = b.beta;
  auto const init = spectral_normalize(init_params(spec, 7004));
  for (auto arm : {Arm::supervised, Arm::self_weighted, Arm::self_unweighted}) {
    TrainConfig cfg;
    cfg.arm = arm;
    cfg.epochs = b.epochs;
    cfg.batch_size = b.batch;
    cfg.adam.lr = b.lr;
    cfg.seed = 7005;
    auto const r = train(cfg, init, train_set, nullptr, arm_weight(arm, train_set, cfg.weight_mode));
    out.psnr[arm] = evaluate(r.params, test_set, cfg.deq).mean_psnr;
    out.params.emplace(arm, r.params);
    std::printf("  benchmark: %s %.3f dB after %ld epochs (%.0f s elapsed)\n", to_string(arm), out.psnr[arm], b.epochs,
                seconds_since(t0));
    std::fflush(stdout);
  }
  out.seconds = seconds_since(t0);
  cache = std::move(out);
  return *cache;
}

auto fixed_point_contract() -> Outcome
{
  auto const &bench = run_bench();
  auto const &p = bench.params.at(Arm::self_weighted);
  double worst_layer = 0.0;
  auto probe = p;
  for (long l = 0; l < static_cast<long>(probe.spec.layers.size()); ++l) {
    worst_layer = std::max(worst_layer, estimate_layer_norm(probe, l, 300));
  }
  auto const val = bench_data(bench.setup, 100, 7006);
  DeqConfig cfg;
  long ok = 0, iters = 0;
  for (auto const &pair : val.pairs) {
    auto const f = forward_fixed_point(p, pair.y, pair.mask, val.coils, cfg);
    bool const good = f.converged && f.iters <= 100 && f.residuals.back() <= 1e-3;
    ok += good ? 1 : 0;
    iters = std::max(iters, f.iters);
  }
  return {ok >= 95, fmt("trained self_weighted theta (largest layer norm %.4f): %ld/100 inputs reach 1e-3 within 100 "
                        "iterations (slowest %ld)",
                        worst_layer, ok, iters)};
}

auto ablation() -> Outcome
{
  auto const &b = run_bench();
  double const sup = b.psnr.at(Arm::supervised), sw = b.psnr.at(Arm::self_weighted),
               su = b.psnr.at(Arm::self_unweighted);
  bool const ok = sup >= sw && sw >= su && sw - su >= 0.3 && sup - sw <= 1.5 && b.seconds < 1800.0;
  return {ok, fmt("supervised %.3f, self_weighted %.3f, self_unweighted %.3f dB (weighted - unweighted %+.3f, supervised "
                  "- weighted %+.3f); %ld epochs, %.0f s of 1800",
                  sup, sw, su, sw - su, sup - sw, b.setup.epochs, b.seconds)};
}

auto baselines() -> Outcome
{
  auto const &b = run_bench();
  double const sw = b.psnr.at(Arm::self_weighted);
  bool const ok = b.tv - b.zf >= 3.0 && sw > b.tv;
  return {ok, fmt("zero-filled %.3f, TV %.3f (tau %g), self_weighted %.3f dB", b.zf, b.tv, b.tv_tau, sw)};
}

// ---- 9: determinism through the CLI -------------------------------------------

auto slurp(fs::path const &p) -> std::string
{
  std::ifstream in{p, std::ios::binary};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Byte comparison of every regular file under a and b, skipping names in `skip`.
auto same_tree(fs::path const &a, fs::path const &b, std::set<std::string> const &skip, std::string &why) -> bool
{
  std::set<fs::path> files;
  for (auto const &root : {a, b}) {
    for (auto const &e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && !skip.count(e.path().filename().string())) { files.insert(fs::relative(e.path(), root)); }
    }
  }
  if (files.empty()) {
    why = "no files under " + a.string();
    return false;
  }
  for (auto const &f : files) {
    if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

auto run_cli(std::string const &cwd, std::string const &args) -> int
{
  std::string const cmd = "cd '" + cwd + "' && " + std::string{DEQMRI_CLI_PATH} + " " + args + " > /dev/null";
  return std::system(cmd.c_str());
}

auto determinism() -> Outcome
{
  TempDir tmp{"accept9"};
  auto const d = tmp.path.string();
  std::string why;
  long checks = 0;
  for (auto const &run : {"a", "b"}) {
    // relative paths, so manifests that record them match too
    std::string const r = d + "/" + run;
    fs::create_directories(r);
    if (run_cli(r, "gen-data --out data --n-pairs 6 --seed 31") != 0 ||
        run_cli(r, "train --data data --name t --runs runs --epochs 2 --batch-size 3 --lr 1e-3 "
                   "--channels 8 --seed 5 --checkpoint-every 1") != 0 ||
        run_cli(r, "verify --suite jfb-exact --seed 7 --out verify.json") != 0 ||
        run_cli(r, "reconstruct --data data --name t --runs runs") != 0) {
      return {false, fmt("a CLI step failed in run %s", run)};
    }
  }
  bool ok = same_tree(d + "/a/data", d + "/b/data", {}, why);
  checks += ok;
  // metrics.csv carries wall-clock seconds; every array and checkpoint must match
  ok = ok && same_tree(d + "/a/runs", d + "/b/runs", {"metrics.csv"}, why);
  checks += ok;
  ok = ok && slurp(d + "/a/verify.json") == slurp(d + "/b/verify.json");
  checks += ok;
  if (!ok && why.empty()) { why = "verify.json differs"; }
  return {ok, ok ? "gen-data, train (checkpoints, reconstructions) and verify outputs byte-identical across two runs"
                 : "mismatch: " + why};
}

} // namespace

int main(int argc, char **argv)
{
  std::vector<std::pair<std::string, std::function<Outcome()>>> const criteria{
    {"adjoint and orthogonality", adjoint},
    {"weighted expectation is the identity", expectation},
    {"self-supervised update equals supervised, exact", jfb_exact},
    {"self-supervised update, Monte Carlo convergence", jfb_mc},
    {"gradients against finite differences", gradients},
    {"fixed-point convergence contract", fixed_point_contract},
    {"ablation ordering", ablation},
    {"baseline ordering", baselines},
    {"determinism", determinism},
  };
  std::set<int> want;
  for (int i = 1; i < argc; ++i) {
    want.insert(std::atoi(argv[i]));
  }
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int const id = static_cast<int>(i) + 1;
    if (!want.empty() && !want.count(id)) { continue; }
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (std::exception const &e) {
      o = {false, std::string{"threw: "} + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d: %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
