#include "deqmri/denoiser.hpp"
#include "deqmri/keyvalue.hpp"
#include "deqmri/sampling.hpp"
#include "deqmri/simd/kernels.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace deqmri {

namespace fs = std::filesystem;

auto DenoiserSpec::standard(long h, long w, long depth, long channels, long kernel) -> DenoiserSpec
{
  DenoiserSpec s;
  s.h = h;
  s.w = w;
  for (long l = 0; l < depth; ++l) {
    long const in = l == 0 ? 2 : channels;
    long const out = l == depth - 1 ? 2 : channels;
    s.layers.push_back({in, out, kernel, l != depth - 1});
  }
  return s;
}

auto DenoiserSpec::weight_count(long layer) const -> long
{
  auto const &L = layers[static_cast<std::size_t>(layer)];
  return L.in_ch * L.out_ch * L.kernel * L.kernel;
}

auto DenoiserSpec::param_count() const -> long
{
  long n = 0;
  for (long l = 0; l < static_cast<long>(layers.size()); ++l) {
    n += weight_count(l) + (bias ? layers[static_cast<std::size_t>(l)].out_ch : 0);
  }
  return n;
}

void DenoiserSpec::validate() const
{
  if (h <= 0 || w <= 0) { throw ArgumentError("denoiser spec: image size must be positive"); }
  if (layers.empty()) { throw ArgumentError("denoiser spec: no layers"); }
  if (!(beta > 0.0) || !std::isfinite(beta)) { throw ArgumentError("denoiser spec: activation sharpness must be positive"); }
  if (layers.front().in_ch != 2 || layers.back().out_ch != 2) {
    throw ArgumentError("denoiser spec: first layer must take 2 channels and last layer must emit 2");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto const &L = layers[l];
    if (L.kernel < 1 || L.kernel > 7 || L.kernel % 2 == 0) {
      throw ArgumentError("denoiser spec: layer " + std::to_string(l) + " kernel must be odd and <= 7");
    }
    if (L.in_ch < 1 || L.out_ch < 1) { throw ArgumentError("denoiser spec: channel counts must be positive"); }
    if (l > 0 && layers[l - 1].out_ch != L.in_ch) {
      throw ArgumentError("denoiser spec: channel mismatch entering layer " + std::to_string(l));
    }
  }
}

auto DenoiserParams::weight_offset(long layer) const -> long
{
  long off = 0;
  for (long l = 0; l < layer; ++l) {
    off += spec.weight_count(l) + (spec.bias ? spec.layers[static_cast<std::size_t>(l)].out_ch : 0);
  }
  return off;
}

auto DenoiserParams::bias_offset(long layer) const -> long { return weight_offset(layer) + spec.weight_count(layer); }

auto DenoiserParams::weights(long layer) -> std::span<double>
{
  return {theta.data() + weight_offset(layer), static_cast<std::size_t>(spec.weight_count(layer))};
}

auto DenoiserParams::weights(long layer) const -> std::span<double const>
{
  return {theta.data() + weight_offset(layer), static_cast<std::size_t>(spec.weight_count(layer))};
}

auto zero_params(DenoiserSpec const &spec) -> DenoiserParams
{
  spec.validate();
  DenoiserParams p;
  p.spec = spec;
  p.theta.assign(static_cast<std::size_t>(spec.param_count()), 0.0);
  p.sn_u.resize(spec.layers.size());
  return p;
}

auto init_params(DenoiserSpec const &spec, std::uint64_t seed, double last_scale) -> DenoiserParams
{
  auto p = zero_params(spec);
  Rng rng{seed};
  std::normal_distribution<double> n{0.0, 1.0};
  long const L = static_cast<long>(spec.layers.size());
  for (long l = 0; l < L; ++l) {
    auto const &ls = spec.layers[static_cast<std::size_t>(l)];
    double std = 1.0 / std::sqrt(static_cast<double>(ls.in_ch * ls.kernel * ls.kernel));
    if (l == L - 1) { std *= last_scale; }
    for (auto &v : p.weights(l)) {
      v = std * n(rng);
    }
  }
  return p;
}

namespace {

using Planes = std::vector<double>;

inline auto softplus0(double z) -> double
{
  // log(1 + e^z) - log 2, so that the activation maps 0 to 0
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - std::numbers::ln2;
}

inline auto sigmoid(double z) -> double
{
  if (z >= 0.0) { return 1.0 / (1.0 + std::exp(-z)); }
  double const e = std::exp(z);
  return e / (1.0 + e);
}

auto pad(double const *planes, long ch, long h, long w, long r) -> Planes
{
  long const ph = h + 2 * r, pw = w + 2 * r;
  Planes out(static_cast<std::size_t>(ch * ph * pw), 0.0);
  for (long c = 0; c < ch; ++c) {
    for (long y = 0; y < h; ++y) {
      std::copy_n(planes + (c * h + y) * w, w, out.data() + (c * ph + y + r) * pw + r);
    }
  }
  return out;
}

auto to_planes(ComplexImage const &x) -> Planes
{
  long const n = x.size();
  Planes p(static_cast<std::size_t>(2 * n));
  for (long i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = x.data[static_cast<std::size_t>(i)].real();
    p[static_cast<std::size_t>(n + i)] = x.data[static_cast<std::size_t>(i)].imag();
  }
  return p;
}

auto from_planes(Planes const &p, long h, long w) -> ComplexImage
{
  ComplexImage x(h, w);
  long const n = h * w;
  for (long i = 0; i < n; ++i) {
    x.data[static_cast<std::size_t>(i)] = Cx{p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(n + i)]};
  }
  return x;
}

// out[oc] += sum_ic conv(padded[ic], k[oc, ic])
void conv_layer(std::span<double const> k, LayerSpec const &L, double const *padded, long h, long w, double *out)
{
  auto const &kern = simd::active();
  long const ks = L.kernel;
  long const pplane = (h + ks - 1) * (w + ks - 1);
  for (long oc = 0; oc < L.out_ch; ++oc) {
    for (long ic = 0; ic < L.in_ch; ++ic) {
      kern.conv_accumulate(out + oc * h * w, padded + ic * pplane, h, w, k.data() + (oc * L.in_ch + ic) * ks * ks, ks);
    }
  }
}

// out[ic] += sum_oc conv^T(padded_grad[oc], k[oc, ic]) via the flipped kernel.
void conv_layer_adjoint(std::span<double const> k, LayerSpec const &L, double const *padded, long h, long w,
                        double *out)
{
  auto const &kern = simd::active();
  long const ks = L.kernel;
  long const taps = ks * ks;
  long const pplane = (h + ks - 1) * (w + ks - 1);
  std::vector<double> flip(static_cast<std::size_t>(taps));
  for (long oc = 0; oc < L.out_ch; ++oc) {
    for (long ic = 0; ic < L.in_ch; ++ic) {
      double const *src = k.data() + (oc * L.in_ch + ic) * taps;
      for (long t = 0; t < taps; ++t) {
        flip[static_cast<std::size_t>(t)] = src[taps - 1 - t];
      }
      kern.conv_accumulate(out + ic * h * w, padded + oc * pplane, h, w, flip.data(), ks);
    }
  }
}

struct Tape
{
  std::vector<Planes> padded_in; // per layer
  std::vector<Planes> pre;       // per layer, pre-activation outputs
};

auto run_forward(DenoiserParams const &p, ComplexImage const &x, Tape *tape) -> ComplexImage
{
  auto const &spec = p.spec;
  if (x.h != spec.h || x.w != spec.w) {
    throw DimensionError("denoise: image is " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                         ", denoiser configured for " + std::to_string(spec.h) + "x" + std::to_string(spec.w));
  }
  long const h = spec.h, w = spec.w, n = h * w;
  Planes z = to_planes(x);
  for (long l = 0; l < static_cast<long>(spec.layers.size()); ++l) {
    auto const &L = spec.layers[static_cast<std::size_t>(l)];
    long const r = L.kernel / 2;
    Planes padded = pad(z.data(), L.in_ch, h, w, r);
    Planes out(static_cast<std::size_t>(L.out_ch * n), 0.0);
    if (spec.bias) {
      double const *b = p.theta.data() + p.bias_offset(l);
      for (long oc = 0; oc < L.out_ch; ++oc) {
        std::fill_n(out.data() + oc * n, n, b[oc]);
      }
    }
    conv_layer(p.weights(l), L, padded.data(), h, w, out.data());
    if (tape) {
      tape->padded_in.push_back(std::move(padded));
      tape->pre.push_back(out);
    }
    if (L.activation) {
      double const beta = spec.beta;
      for (auto &v : out) {
        v = softplus0(beta * v) / beta;
      }
    }
    z = std::move(out);
  }
  auto y = from_planes(z, h, w);
  if (spec.residual) {
    for (long i = 0; i < n; ++i) {
      y.data[static_cast<std::size_t>(i)] += x.data[static_cast<std::size_t>(i)];
    }
  }
  return y;
}

} // namespace

auto denoise(DenoiserParams const &p, ComplexImage const &x) -> ComplexImage { return run_forward(p, x, nullptr); }

auto param_vjp(DenoiserParams const &p, ComplexImage const &x, ComplexImage const &v) -> GradVector
{
  require_same_shape(x, v, "param_vjp");
  Tape tape;
  run_forward(p, x, &tape);
  auto const &spec = p.spec;
  auto const &kern = simd::active();
  long const h = spec.h, w = spec.w, n = h * w;
  GradVector grad(p.theta.size(), 0.0);
  Planes g = to_planes(v);
  for (long l = static_cast<long>(spec.layers.size()) - 1; l >= 0; --l) {
    auto const &L = spec.layers[static_cast<std::size_t>(l)];
    auto const &pre = tape.pre[static_cast<std::size_t>(l)];
    if (L.activation) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] *= sigmoid(spec.beta * pre[i]);
      }
    }
    long const ks = L.kernel;
    long const pplane = (h + ks - 1) * (w + ks - 1);
    double *gw = grad.data() + p.weight_offset(l);
    auto const &padded = tape.padded_in[static_cast<std::size_t>(l)];
    for (long oc = 0; oc < L.out_ch; ++oc) {
      for (long ic = 0; ic < L.in_ch; ++ic) {
        kern.conv_weight_grad(gw + (oc * L.in_ch + ic) * ks * ks, g.data() + oc * n, padded.data() + ic * pplane, h, w,
                              ks);
      }
    }
    if (spec.bias) {
      double *gb = grad.data() + p.bias_offset(l);
      for (long oc = 0; oc < L.out_ch; ++oc) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i) {
          acc += g[static_cast<std::size_t>(oc * n + i)];
        }
        gb[oc] += acc;
      }
    }
    if (l > 0) {
      Planes gpad = pad(g.data(), L.out_ch, h, w, ks / 2);
      Planes din(static_cast<std::size_t>(L.in_ch * n), 0.0);
      conv_layer_adjoint(p.weights(l), L, gpad.data(), h, w, din.data());
      g = std::move(din);
    }
  }
  return grad;
}

void apply_layer(DenoiserParams const &p, long layer, std::span<double const> in, std::span<double> out)
{
  auto const &L = p.spec.layers[static_cast<std::size_t>(layer)];
  long const n = p.spec.h * p.spec.w;
  if (static_cast<long>(in.size()) != L.in_ch * n || static_cast<long>(out.size()) != L.out_ch * n) {
    throw DimensionError("apply_layer: plane buffer sizes do not match layer " + std::to_string(layer));
  }
  auto padded = pad(in.data(), L.in_ch, p.spec.h, p.spec.w, L.kernel / 2);
  std::fill(out.begin(), out.end(), 0.0);
  conv_layer(p.weights(layer), L, padded.data(), p.spec.h, p.spec.w, out.data());
}

void apply_layer_adjoint(DenoiserParams const &p, long layer, std::span<double const> in, std::span<double> out)
{
  auto const &L = p.spec.layers[static_cast<std::size_t>(layer)];
  long const n = p.spec.h * p.spec.w;
  if (static_cast<long>(in.size()) != L.out_ch * n || static_cast<long>(out.size()) != L.in_ch * n) {
    throw DimensionError("apply_layer_adjoint: plane buffer sizes do not match layer " + std::to_string(layer));
  }
  auto padded = pad(in.data(), L.out_ch, p.spec.h, p.spec.w, L.kernel / 2);
  std::fill(out.begin(), out.end(), 0.0);
  conv_layer_adjoint(p.weights(layer), L, padded.data(), p.spec.h, p.spec.w, out.data());
}

namespace {

auto l2(std::vector<double> const &v) -> double
{
  double acc = 0.0;
  for (double x : v) {
    acc += x * x;
  }
  return std::sqrt(acc);
}

} // namespace

auto estimate_layer_norm(DenoiserParams &p, long layer, long iterations) -> double
{
  auto const &L = p.spec.layers[static_cast<std::size_t>(layer)];
  long const n = p.spec.h * p.spec.w;
  if (p.sn_u.size() != p.spec.layers.size()) { p.sn_u.resize(p.spec.layers.size()); }
  auto &u = p.sn_u[static_cast<std::size_t>(layer)];
  if (u.empty()) {
    Rng rng{0x5eed0000ULL + static_cast<std::uint64_t>(layer)};
    std::normal_distribution<double> g{0.0, 1.0};
    u.resize(static_cast<std::size_t>(L.in_ch * n));
    for (auto &x : u) {
      x = g(rng);
    }
    double const s = l2(u);
    for (auto &x : u) {
      x /= s;
    }
  }
  std::vector<double> v(static_cast<std::size_t>(L.out_ch * n));
  std::vector<double> next(u.size());
  for (long it = 0; it < iterations; ++it) {
    apply_layer(p, layer, u, v);
    double const sv = l2(v);
    if (sv == 0.0) { return 0.0; }
    for (auto &x : v) {
      x /= sv;
    }
    apply_layer_adjoint(p, layer, v, next);
    double const su = l2(next);
    if (su == 0.0) { return 0.0; }
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = next[i] / su;
    }
  }
  apply_layer(p, layer, u, v);
  return l2(v);
}

auto spectral_normalize(DenoiserParams p, SpectralNormConfig const &cfg) -> DenoiserParams
{
  if (p.sn_u.size() != p.spec.layers.size()) { p.sn_u.resize(p.spec.layers.size()); }
  for (long l = 0; l < static_cast<long>(p.spec.layers.size()); ++l) {
    bool const fresh = p.sn_u[static_cast<std::size_t>(l)].empty();
    long done = fresh ? cfg.warmup_iterations : cfg.iterations;
    double sigma = estimate_layer_norm(p, l, done);
    // a big optimiser step can rotate the top singular vector away from u; 5 steps then underestimate
    while (done < cfg.max_iterations) {
      double const next = estimate_layer_norm(p, l, 1);
      ++done;
      bool const settled = std::abs(next - sigma) <= cfg.settle * next;
      sigma = next;
      if (settled) { break; }
    }
    if (sigma > 1.0) {
      for (auto &v : p.weights(l)) {
        v /= sigma;
      }
    }
  }
  return p;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

auto encode_f64(std::vector<double> const &v) -> std::vector<unsigned char>
{
  std::vector<unsigned char> buf(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(v[i]);
    if constexpr (std::endian::native == std::endian::big) { bits = __builtin_bswap64(bits); }
    std::memcpy(buf.data() + i * 8, &bits, 8);
  }
  return buf;
}

auto decode_f64(std::vector<unsigned char> const &buf) -> std::vector<double>
{
  std::vector<double> v(buf.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, buf.data() + i * 8, 8);
    if constexpr (std::endian::native == std::endian::big) { bits = __builtin_bswap64(bits); }
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

auto crc_hex(std::vector<unsigned char> const &buf) -> std::string
{
  char s[16];
  std::snprintf(s, sizeof s, "%08lx", static_cast<unsigned long>(crc32(0L, buf.data(), static_cast<uInt>(buf.size()))));
  return s;
}

void write_file(fs::path const &path, std::vector<unsigned char> const &buf)
{
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  out.write(reinterpret_cast<char const *>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) { throw FormatError("write failed for '" + path.string() + "'"); }
}

auto read_file(fs::path const &path, std::size_t expected, std::string const &crc) -> std::vector<unsigned char>
{
  std::ifstream in{path, std::ios::binary};
  if (!in) { throw FormatError("cannot read '" + path.string() + "'"); }
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() != expected) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(buf.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  if (crc_hex(buf) != crc) { throw FormatError("checksum mismatch for '" + path.string() + "'"); }
  return buf;
}

} // namespace

void save_checkpoint(fs::path const &dir, DenoiserParams const &p)
{
  fs::create_directories(dir);
  KeyValue m;
  m.set("format", std::string{"deqmri-denoiser"});
  m.set("version", 1L);
  m.set("h", p.spec.h);
  m.set("w", p.spec.w);
  m.set("residual", p.spec.residual ? 1L : 0L);
  m.set("bias", p.spec.bias ? 1L : 0L);
  m.set("beta", p.spec.beta);
  m.set("layers", static_cast<long>(p.spec.layers.size()));
  for (std::size_t l = 0; l < p.spec.layers.size(); ++l) {
    auto const &L = p.spec.layers[l];
    m.set("layer." + std::to_string(l), std::to_string(L.in_ch) + "," + std::to_string(L.out_ch) + "," +
                                            std::to_string(L.kernel) + "," + (L.activation ? "act" : "linear"));
  }
  m.set("n_params", static_cast<long>(p.theta.size()));
  auto const tb = encode_f64(p.theta);
  write_file(dir / "theta.f64", tb);
  m.set("crc32.theta.f64", crc_hex(tb));

  std::vector<double> sn;
  std::string present;
  for (auto const &u : p.sn_u) {
    present += u.empty() ? '0' : '1';
    sn.insert(sn.end(), u.begin(), u.end());
  }
  m.set("sn_present", present.empty() ? std::string{"-"} : present);
  auto const sb = encode_f64(sn);
  write_file(dir / "sn_state.f64", sb);
  m.set("crc32.sn_state.f64", crc_hex(sb));
  m.save(dir / "manifest.txt");
}

auto load_checkpoint(fs::path const &dir) -> DenoiserParams
{
  auto const m = KeyValue::load(dir / "manifest.txt");
  if (m.get("format") != "deqmri-denoiser") { throw FormatError(m.origin() + ": not a denoiser checkpoint"); }
  if (m.get_long("version") != 1) { throw FormatError(m.origin() + ": unsupported version"); }
  DenoiserSpec spec;
  spec.h = m.get_long("h");
  spec.w = m.get_long("w");
  spec.residual = m.get_long("residual") != 0;
  spec.bias = m.get_long("bias") != 0;
  spec.beta = m.get_double("beta");
  long const nl = m.get_long("layers");
  for (long l = 0; l < nl; ++l) {
    auto const key = "layer." + std::to_string(l);
    std::stringstream ss{m.get(key)};
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || !std::getline(ss, d)) {
      throw FormatError(m.origin() + ": malformed '" + key + "'");
    }
    try {
      spec.layers.push_back({std::stol(a), std::stol(b), std::stol(c), d == "act"});
    } catch (std::exception const &) {
      throw FormatError(m.origin() + ": malformed '" + key + "'");
    }
  }
  try {
    spec.validate();
  } catch (ArgumentError const &e) {
    throw FormatError(m.origin() + ": " + e.what());
  }
  auto p = zero_params(spec);
  if (m.get_long("n_params") != spec.param_count()) { throw FormatError(m.origin() + ": n_params does not match layers"); }
  p.theta = decode_f64(read_file(dir / "theta.f64", p.theta.size() * 8, m.get("crc32.theta.f64")));

  auto const present = m.get("sn_present");
  std::size_t total = 0;
  long const n = spec.h * spec.w;
  if (present != "-") {
    if (present.size() != spec.layers.size()) { throw FormatError(m.origin() + ": sn_present length mismatch"); }
    for (std::size_t l = 0; l < present.size(); ++l) {
      if (present[l] == '1') { total += static_cast<std::size_t>(spec.layers[l].in_ch * n); }
    }
  }
  auto sn = decode_f64(read_file(dir / "sn_state.f64", total * 8, m.get("crc32.sn_state.f64")));
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layers.size() && present != "-"; ++l) {
    if (present[l] != '1') { continue; }
    auto const len = static_cast<std::size_t>(spec.layers[l].in_ch * n);
    p.sn_u[l].assign(sn.begin() + static_cast<long>(off), sn.begin() + static_cast<long>(off + len));
    off += len;
  }
  return p;
}

} // namespace deqmri
