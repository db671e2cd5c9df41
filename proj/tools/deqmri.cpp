// Command-line driver: dataset generation, training, reconstruction,
// evaluation, verification suites and classical baselines.
//
// Every subcommand reads an optional flat key = value config (--config) and
// lets each key be overridden by a flag of the same name (underscores become
// dashes) or by --set key=value. Unknown keys are rejected.

#include "deqmri/baselines.hpp"
#include "deqmri/datagen.hpp"
#include "deqmri/keyvalue.hpp"
#include "deqmri/metrics.hpp"
#include "deqmri/simd/kernels.hpp"
#include "deqmri/suites.hpp"
#include "deqmri/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace deqmri;

namespace {

struct Key
{
  std::string name;
  std::string fallback; // empty + required => must be given
  std::string help;
  bool required = false;
};

// Config resolution for one subcommand.
class Settings
{
public:
  Settings(CLI::App *app, std::vector<Key> keys)
    : keys_{std::move(keys)}
  {
    app->add_option("--config", config_, "flat key = value file");
    app->add_option("--set", sets_, "override, key=value (repeatable)");
    for (auto const &k : keys_) {
      std::string flag = k.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      auto *opt = app->add_option("--" + flag, flags_[k.name], k.help);
      if (!k.fallback.empty()) { opt->description(k.help + " [" + k.fallback + "]"); }
    }
  }

  void resolve()
  {
    KeyValue kv;
    if (!config_.empty()) { kv = KeyValue::load(config_); }
    for (auto const &s : sets_) {
      auto const eq = s.find('=');
      if (eq == std::string::npos) { throw ArgumentError("--set expects key=value, got '" + s + "'"); }
      kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (auto const &[k, v] : flags_) {
      if (!v.empty()) { kv.set(k, v); }
    }
    for (auto const &k : kv.keys()) {
      bool known = false;
      for (auto const &d : keys_) {
        known = known || d.name == k;
      }
      if (!known) { throw ArgumentError("unknown config key '" + k + "' (from " + kv.origin() + ")"); }
    }
    for (auto const &d : keys_) {
      if (kv.has(d.name)) { continue; }
      if (d.required) { throw ArgumentError("missing config key '" + d.name + "'"); }
      kv.set(d.name, d.fallback);
    }
    kv_ = std::move(kv);
  }

  auto str(std::string const &k) const -> std::string { return kv_.get(k); }
  auto num(std::string const &k) const -> double { return kv_.get_double(k); }
  auto integer(std::string const &k) const -> long { return kv_.get_long(k); }
  auto u64(std::string const &k) const -> std::uint64_t { return kv_.get_u64(k); }
  auto flag(std::string const &k) const -> bool { return kv_.get_long(k) != 0; }
  auto all() const -> KeyValue const & { return kv_; }

private:
  std::vector<Key> keys_;
  std::string config_;
  std::vector<std::string> sets_;
  std::map<std::string, std::string> flags_;
  KeyValue kv_;
};

auto parse_doubles(std::string const &s, std::string const &key) -> std::vector<double>
{
  std::vector<double> out;
  std::stringstream ss{s};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) { throw std::invalid_argument(item); }
    } catch (std::exception const &) {
      throw ArgumentError("config key '" + key + "': '" + item + "' is not a number");
    }
  }
  if (out.empty()) { throw ArgumentError("config key '" + key + "' is empty"); }
  return out;
}

auto load_dataset(std::string const &dir) -> Dataset
{
  if (!fs::exists(fs::path{dir} / "manifest.txt")) { throw FormatError("no dataset at '" + dir + "'"); }
  return read_dataset(dir);
}

std::vector<Key> const model_keys{
  {"depth", "3", "conv layers"},
  {"channels", "16", "hidden channels"},
  {"kernel", "3", "kernel size"},
  {"beta", "10", "activation sharpness"},
  {"init_seed", "0", "initialisation seed"},
  {"init_scale", "0.01", "last-layer init scale"},
};

std::vector<Key> const deq_keys{
  {"alpha", "0.5", "denoiser weight in T"},
  {"gamma", "1", "data step"},
  {"max_iters", "100", "forward iteration budget"},
  {"tol", "1e-3", "relative residual tolerance"},
};

auto join_keys(std::vector<Key> a, std::vector<Key> const &b) -> std::vector<Key>
{
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

auto deq_config(Settings const &s) -> DeqConfig
{
  DeqConfig c;
  c.alpha = s.num("alpha");
  c.gamma = s.num("gamma");
  c.max_iters = s.integer("max_iters");
  c.tol = s.num("tol");
  c.validate();
  return c;
}

auto run_dir(Settings const &s) -> fs::path { return fs::path{s.str("runs")} / s.str("name"); }

auto checkpoint_path(Settings const &s) -> fs::path
{
  auto const c = s.str("checkpoint");
  if (c.empty() && s.str("name").empty()) { throw ArgumentError("missing config key 'name' (or 'checkpoint')"); }
  return c.empty() ? run_dir(s) / "checkpoints" / "final" : fs::path{c};
}

// ---- subcommands -----------------------------------------------------------

int cmd_gen_data(Settings const &s)
{
  DatasetSpec d;
  d.n_pairs = s.integer("n_pairs");
  d.h = s.integer("height");
  d.w = s.integer("width");
  d.coils = s.integer("coils");
  d.R = s.integer("R");
  d.acs = s.integer("acs");
  d.variant = parse_variant(s.str("variant"));
  d.sigma = s.num("sigma");
  d.master_seed = s.u64("seed");
  auto data = generate_dataset(d);
  if (!s.flag("groundtruth")) { data.strip_groundtruth(); }
  write_dataset(s.str("out"), data);
  std::printf("wrote %ld pairs (%ldx%ld, %ld coils, R=%ld, %s) to %s\n", data.size(), d.h, d.w, d.coils, d.R,
              to_string(d.variant), s.str("out").c_str());
  return 0;
}

int cmd_train(Settings const &s)
{
  auto const data = load_dataset(s.str("data"));
  std::optional<Dataset> val;
  if (!s.str("val").empty()) { val = load_dataset(s.str("val")); }

  auto spec = DenoiserSpec::standard(data.info.h, data.info.w, s.integer("depth"), s.integer("channels"),
                                     s.integer("kernel"));
  spec.beta = s.num("beta");
  auto const init = spectral_normalize(init_params(spec, s.u64("init_seed"), s.num("init_scale")));

  TrainConfig cfg;
  cfg.arm = parse_arm(s.str("arm"));
  cfg.epochs = s.integer("epochs");
  cfg.batch_size = s.integer("batch_size");
  cfg.adam.lr = s.num("lr");
  cfg.seed = s.u64("seed");
  cfg.deq = deq_config(s);
  cfg.shuffle = s.flag("shuffle");
  auto const wm = s.str("weight_mode");
  if (wm != "exact" && wm != "empirical") { throw ArgumentError("config key 'weight_mode' must be exact or empirical"); }
  cfg.weight_mode = wm == "exact" ? WeightMode::exact : WeightMode::empirical;
  auto const dir = run_dir(s);
  fs::create_directories(dir / "checkpoints");
  cfg.checkpoint_every = s.integer("checkpoint_every");
  cfg.checkpoint_dir = dir / "checkpoints";

  auto const r = train(cfg, init, data, val ? &*val : nullptr, arm_weight(cfg.arm, data, cfg.weight_mode));
  save_checkpoint(dir / "checkpoints" / "final", r.params);
  write_metrics_csv(dir / "metrics.csv", r.log);

  auto m = s.all();
  m.set("command", std::string{"train"});
  m.set("n_params", static_cast<long>(r.params.theta.size()));
  m.set("kernels", std::string{simd::active().name});
  m.save(dir / "manifest.txt");
  for (auto const &e : r.log) {
    std::printf("epoch %3ld  loss %.6g  val_psnr %.3f  val_ssim %.4f  nonconverged %ld\n", e.epoch, e.loss, e.val_psnr,
                e.val_ssim, e.nonconverged);
  }
  return 0;
}

int cmd_reconstruct(Settings const &s)
{
  auto const data = load_dataset(s.str("data"));
  auto const params = load_checkpoint(checkpoint_path(s));
  auto const fps = reconstruct_all(params, data, deq_config(s));
  fs::path const out = !s.str("out").empty() ? fs::path{s.str("out")} : s.str("name").empty() ? checkpoint_path(s) / ".." / ".." / "recon" : run_dir(s) / "recon";
  std::vector<ComplexImage> images;
  for (auto const &f : fps) {
    images.push_back(f.x_bar);
  }
  write_images(out, images);
  std::ofstream csv{out / "iterations.csv", std::ios::trunc};
  csv << "image,iters,converged,last_residual\n";
  for (std::size_t i = 0; i < fps.size(); ++i) {
    csv << i << ',' << fps[i].iters << ',' << (fps[i].converged ? 1 : 0) << ','
        << (fps[i].residuals.empty() ? 0.0 : fps[i].residuals.back()) << '\n';
  }
  std::printf("wrote %zu reconstructions to %s\n", images.size(), out.string().c_str());
  return 0;
}

int cmd_eval(Settings const &s)
{
  auto const data = load_dataset(s.str("data"));
  auto const params = load_checkpoint(checkpoint_path(s));
  auto const ev = evaluate(params, data, deq_config(s));
  fs::path const out = !s.str("out").empty() ? fs::path{s.str("out")} : s.str("name").empty() ? checkpoint_path(s) / ".." / ".." / "eval.csv" : run_dir(s) / "eval.csv";
  if (out.has_parent_path()) { fs::create_directories(out.parent_path()); }
  std::ofstream csv{out, std::ios::trunc};
  if (!csv) { throw FormatError("cannot write '" + out.string() + "'"); }
  csv << "image,psnr,ssim,iters,converged\n";
  char buf[160];
  for (std::size_t i = 0; i < ev.psnr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%ld,%d\n", i, ev.psnr[i], ev.ssim[i], ev.iters[i],
                  ev.converged[i] ? 1 : 0);
    csv << buf;
  }
  std::printf("mean psnr %.3f dB  mean ssim %.4f  (%zu images) -> %s\n", ev.mean_psnr, ev.mean_ssim, ev.psnr.size(),
              out.string().c_str());
  return 0;
}

auto report_json(VerificationReport const &r) -> nlohmann::json
{
  nlohmann::json j;
  j["name"] = r.name;
  j["discrepancy"] = r.discrepancy;
  j["tolerance"] = r.tolerance;
  j["passed"] = r.passed;
  j["context"] = r.context;
  nlohmann::json d = nlohmann::json::object();
  for (auto const &[k, v] : r.details) {
    d[k] = v;
  }
  j["details"] = d;
  return j;
}

int cmd_verify(Settings const &s)
{
  SuiteOptions opt;
  opt.family = parse_variant(s.str("family"));
  opt.seed = s.u64("seed");
  opt.mc_repeats = s.integer("mc_repeats");
  auto const reports = run_suite(s.str("suite"), opt);
  bool ok = true;
  nlohmann::json arr = nlohmann::json::array();
  for (auto const &r : reports) {
    ok = ok && r.passed;
    std::printf("%-4s %-32s discrepancy %.3e  tolerance %.1e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.discrepancy, r.tolerance);
    arr.push_back(report_json(r));
  }
  auto const out = s.str("out");
  if (!out.empty()) {
    fs::path const p{out};
    if (p.has_parent_path()) { fs::create_directories(p.parent_path()); }
    std::ofstream f{p, std::ios::trunc};
    if (!f) { throw FormatError("cannot write '" + out + "'"); }
    f << arr.dump(2) << '\n';
  }
  std::printf("%zu reports, %s\n", reports.size(), ok ? "all passed" : "FAILURES");
  return ok ? 0 : 1;
}

int cmd_baseline(Settings const &s)
{
  auto const data = load_dataset(s.str("data"));
  if (!data.has_groundtruth()) { throw ArgumentError("baseline: dataset '" + s.str("data") + "' has no groundtruth"); }
  auto const tune = s.str("tune").empty() ? data : load_dataset(s.str("tune"));
  TvConfig base;
  base.iters = s.integer("tv_iters");
  base.inner_iters = s.integer("inner_iters");
  auto const best = tv_grid_search(tune, parse_doubles(s.str("taus"), "taus"), base);

  std::vector<ComplexImage> zf, tv;
  for (long i = 0; i < data.size(); ++i) {
    auto const &p = data.pairs[static_cast<std::size_t>(i)];
    zf.push_back(zero_filled(p.y, p.mask, data.coils));
    tv.push_back(tv_reconstruct(p.y, p.mask, data.coils, best).image);
  }
  auto const ez = score(zf, data), et = score(tv, data);
  auto const dir = run_dir(s);
  write_images(dir / "recon" / "zero_filled", zf);
  write_images(dir / "recon" / "tv", tv);
  std::ofstream csv{dir / "baseline.csv", std::ios::trunc};
  csv << "image,zf_psnr,zf_ssim,tv_psnr,tv_ssim\n";
  char buf[160];
  for (long i = 0; i < data.size(); ++i) {
    auto const k = static_cast<std::size_t>(i);
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f,%.6f\n", i, ez.psnr[k], ez.ssim[k], et.psnr[k], et.ssim[k]);
    csv << buf;
  }
  auto m = s.all();
  m.set("command", std::string{"baseline"});
  m.set("tv_tau", best.tau);
  m.save(dir / "manifest.txt");
  std::printf("zero-filled %.3f dB / %.4f   TV(tau=%g) %.3f dB / %.4f\n", ez.mean_psnr, ez.mean_ssim, best.tau,
              et.mean_psnr, et.mean_ssim);
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Self-supervised deep equilibrium MRI reconstruction toolkit"};
  app.require_subcommand(1);
  std::string kernels;
  app.add_option("--kernels", kernels, "force the kernel variant (scalar, avx2)");

  auto *gen = app.add_subcommand("gen-data", "simulate a paired-acquisition dataset");
  Settings s_gen{gen,
                 {{"out", "", "output directory", true},
                  {"n_pairs", "8", "number of (y, y') pairs"},
                  {"height", "32", "image rows"},
                  {"width", "32", "image columns / k_y lines"},
                  {"coils", "4", "receive coils"},
                  {"R", "4", "acceleration"},
                  {"acs", "4", "ACS lines"},
                  {"variant", "full", "mask family: full or deficient"},
                  {"sigma", "0.01", "noise std per real/imag part"},
                  {"seed", "0", "master seed"},
                  {"groundtruth", "1", "store groundtruth images (0/1)"}}};

  auto *tr = app.add_subcommand("train", "train the denoiser inside the DEQ");
  Settings s_tr{tr, join_keys(join_keys({{"data", "", "training dataset", true},
                                         {"val", "", "validation dataset"},
                                         {"name", "", "run name", true},
                                         {"runs", "runs", "run root directory"},
                                         {"arm", "self_weighted", "supervised, self_weighted or self_unweighted"},
                                         {"epochs", "30", "epochs"},
                                         {"batch_size", "8", "mini-batch size"},
                                         {"lr", "1e-4", "Adam learning rate"},
                                         {"seed", "0", "shuffle seed"},
                                         {"shuffle", "1", "shuffle every epoch (0/1)"},
                                         {"weight_mode", "exact", "exact or empirical line weights"},
                                         {"checkpoint_every", "0", "epochs between checkpoints, 0 = final only"}},
                                        model_keys),
                              deq_keys)};

  std::vector<Key> const use_keys{{"data", "", "dataset", true},
                                  {"name", "", "run name (locates the checkpoint)"},
                                  {"runs", "runs", "run root directory"},
                                  {"checkpoint", "", "checkpoint directory (overrides name)"},
                                  {"out", "", "output path"}};
  auto *rec = app.add_subcommand("reconstruct", "run the DEQ forward pass on every y of a dataset");
  Settings s_rec{rec, join_keys(use_keys, deq_keys)};
  auto *ev = app.add_subcommand("eval", "per-image PSNR/SSIM of DEQ reconstructions");
  Settings s_ev{ev, join_keys(use_keys, deq_keys)};

  auto *ver = app.add_subcommand("verify", "numerical checks of the operator identities");
  Settings s_ver{ver,
                 {{"suite", "all", "adjoint, expectation, jfb-exact, jfb-mc or all"},
                  {"family", "full", "mask family variant"},
                  {"seed", "0", "seed"},
                  {"mc_repeats", "32", "independent estimates per draw count"},
                  {"out", "", "JSON report file"}}};

  auto *base = app.add_subcommand("baseline", "zero-filled and TV reconstructions");
  Settings s_base{base,
                  {{"data", "", "test dataset", true},
                   {"tune", "", "dataset for the tau grid search (default: data)"},
                   {"name", "", "run name", true},
                   {"runs", "runs", "run root directory"},
                   {"taus", "1e-4,3e-4,1e-3,3e-3,1e-2,3e-2", "tau grid"},
                   {"tv_iters", "100", "outer iterations"},
                   {"inner_iters", "20", "dual iterations per prox"}}};

  CLI11_PARSE(app, argc, argv);
  try {
    if (!kernels.empty() && !simd::select(kernels)) { throw ArgumentError("kernel variant '" + kernels + "' unavailable"); }
    if (gen->parsed()) { s_gen.resolve(); return cmd_gen_data(s_gen); }
    if (tr->parsed()) { s_tr.resolve(); return cmd_train(s_tr); }
    if (rec->parsed()) { s_rec.resolve(); return cmd_reconstruct(s_rec); }
    if (ev->parsed()) { s_ev.resolve(); return cmd_eval(s_ev); }
    if (ver->parsed()) { s_ver.resolve(); return cmd_verify(s_ver); }
    if (base->parsed()) { s_base.resolve(); return cmd_baseline(s_base); }
  } catch (std::exception const &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
