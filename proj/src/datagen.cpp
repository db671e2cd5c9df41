#include "deqmri/datagen.hpp"
#include "deqmri/keyvalue.hpp"

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

auto derive_seed(std::uint64_t master, std::uint64_t stream) -> std::uint64_t
{
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

auto generate_phantom(std::uint64_t seed, long h, long w) -> Phantom
{
  if (h < 16 || w < 16) { throw ArgumentError("generate_phantom: h and w must be >= 16"); }
  Rng rng{seed};
  std::uniform_real_distribution<double> u{0.0, 1.0};
  auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };

  struct Ellipse
  {
    double cx, cy, a, b, cos_t, sin_t, value;
  };
  std::vector<Ellipse> shapes;
  // Outer body, then interior structures that add or subtract intensity.
  double const t0 = uni(0.0, std::numbers::pi);
  shapes.push_back({uni(-0.05, 0.05), uni(-0.05, 0.05), uni(0.7, 0.85), uni(0.8, 0.92), std::cos(t0), std::sin(t0),
                    uni(0.4, 0.6)});
  long const n_inner = 3 + static_cast<long>(u(rng) * 5.0);
  for (long i = 0; i < n_inner; ++i) {
    double const t = uni(0.0, std::numbers::pi);
    shapes.push_back({uni(-0.45, 0.45), uni(-0.45, 0.45), uni(0.08, 0.35), uni(0.08, 0.35), std::cos(t), std::sin(t),
                      uni(-0.3, 0.45)});
  }
  // Smooth multiplicative shading and smooth phase.
  double const fx = uni(0.5, 1.5), fy = uni(0.5, 1.5), ph0 = uni(0.0, 2.0 * std::numbers::pi);
  double const shade = uni(0.05, 0.2);
  double const px = uni(-1.0, 1.0), py = uni(-1.0, 1.0), pxy = uni(-0.5, 0.5);

  Phantom out{ComplexImage(h, w), seed};
  double peak = 0.0;
  for (long r = 0; r < h; ++r) {
    double const y = (2.0 * r + 1.0) / static_cast<double>(h) - 1.0;
    for (long c = 0; c < w; ++c) {
      double const x = (2.0 * c + 1.0) / static_cast<double>(w) - 1.0;
      double v = 0.0;
      for (auto const &e : shapes) {
        double const dx = x - e.cx, dy = y - e.cy;
        double const xr = dx * e.cos_t + dy * e.sin_t;
        double const yr = -dx * e.sin_t + dy * e.cos_t;
        if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) { v += e.value; }
      }
      v = std::max(v, 0.0);
      v *= 1.0 + shade * std::sin(std::numbers::pi * (fx * x + fy * y) + ph0);
      double const phase = px * x + py * y + pxy * x * y;
      out.image(r, c) = std::polar(v, phase);
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    for (auto &v : out.image.data) {
      v /= peak;
    }
  }
  return out;
}

auto simulate_coils(long h, long w, long c) -> CoilSensitivities
{
  if (c < 1) { throw ArgumentError("simulate_coils: need at least one coil"); }
  CoilSensitivities s{c, h, w, std::vector<Cx>(static_cast<std::size_t>(c * h * w))};
  for (long k = 0; k < c; ++k) {
    double const angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(c) + std::numbers::pi / 4.0;
    double const cx = 0.7 * std::cos(angle), cy = 0.7 * std::sin(angle);
    double const kx = 0.6 * std::cos(angle), ky = 0.6 * std::sin(angle);
    for (long r = 0; r < h; ++r) {
      double const y = (2.0 * r + 1.0) / static_cast<double>(h) - 1.0;
      for (long col = 0; col < w; ++col) {
        double const x = (2.0 * col + 1.0) / static_cast<double>(w) - 1.0;
        double const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        double const mag = std::exp(-d2 / (2.0 * 0.6 * 0.6));
        s.maps[static_cast<std::size_t>((k * h + r) * w + col)] = std::polar(mag, kx * x + ky * y);
      }
    }
  }
  normalize_coils(s);
  return s;
}

void add_measurement_noise(KSpace &y, SamplingMask const &m, double sigma, Rng &rng)
{
  if (sigma <= 0.0) { return; }
  std::normal_distribution<double> n{0.0, sigma};
  for (long c = 0; c < y.coils; ++c) {
    for (long r = 0; r < y.h; ++r) {
      for (long k = 0; k < y.w; ++k) {
        if (!m.contains(k)) { continue; }
        double const re = n(rng);
        double const im = n(rng);
        y(c, r, k) += Cx{re, im};
      }
    }
  }
}

auto simulate_pair(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &mask,
                   SamplingMask const &mask_prime, double sigma, Rng &rng) -> TrainingPair
{
  if (!(sigma >= 0.0)) { throw ArgumentError("simulate_pair: sigma must be >= 0"); }
  TrainingPair p;
  p.mask = mask;
  p.mask_prime = mask_prime;
  p.y = forward_op(x, s, mask);
  p.y_prime = forward_op(x, s, mask_prime);
  add_measurement_noise(p.y, mask, sigma, rng);
  add_measurement_noise(p.y_prime, mask_prime, sigma, rng);
  p.groundtruth = x;
  return p;
}

auto simulate_pair(Phantom const &x, CoilSensitivities const &s, MaskFamily const &family, double sigma, Rng &rng)
  -> TrainingPair
{
  auto const i = draw_index(family, rng);
  auto const j = draw_index(family, rng);
  return simulate_pair(x.image, s, family.members[static_cast<std::size_t>(i)],
                       family.members[static_cast<std::size_t>(j)], sigma, rng);
}

GroundtruthLock::GroundtruthLock(Dataset const &d)
  : d_{d}
{
  ++d_.deny_depth_;
}

GroundtruthLock::~GroundtruthLock() { --d_.deny_depth_; }

auto Dataset::family() const -> MaskFamily
{
  auto f = make_family(info.w, info.R, info.acs, info.offsets);
  f.variant = info.variant;
  return f;
}

void Dataset::add(TrainingPair pair)
{
  if (pair.groundtruth) {
    if (gt_.size() != pairs.size()) { throw ArgumentError("Dataset::add: mixing pairs with and without groundtruth"); }
    gt_.push_back(std::move(*pair.groundtruth));
    pair.groundtruth.reset();
  } else if (!gt_.empty()) {
    throw ArgumentError("Dataset::add: mixing pairs with and without groundtruth");
  }
  pairs.push_back(std::move(pair));
  info.n_pairs = size();
}

auto Dataset::groundtruth(long i) const -> ComplexImage const &
{
  if (deny_depth_ > 0) { throw AccessError("groundtruth read while access is denied (self-supervised arm)"); }
  if (gt_.empty()) { throw AccessError("dataset carries no groundtruth"); }
  ++reads_;
  return gt_.at(static_cast<std::size_t>(i));
}

namespace {

auto quantize(Cx v) -> Cx
{
  return {static_cast<double>(static_cast<float>(v.real())), static_cast<double>(static_cast<float>(v.imag()))};
}

template <typename It>
void quantize_all(It first, It last)
{
  for (; first != last; ++first) {
    *first = quantize(*first);
  }
}

// ---- raw little-endian arrays ------------------------------------------------

auto to_le(std::uint32_t v) -> std::uint32_t
{
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return __builtin_bswap32(v);
  }
}

void append_c64(std::vector<unsigned char> &buf, Cx const *data, std::size_t n)
{
  std::size_t const off = buf.size();
  buf.resize(off + n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    float const f[2] = {static_cast<float>(data[i].real()), static_cast<float>(data[i].imag())};
    for (int j = 0; j < 2; ++j) {
      std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(f[j]));
      std::memcpy(buf.data() + off + i * 8 + static_cast<std::size_t>(j) * 4, &bits, 4);
    }
  }
}

void read_c64(std::vector<unsigned char> const &buf, std::size_t offset, Cx *out, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) {
    float f[2];
    for (int j = 0; j < 2; ++j) {
      std::uint32_t bits;
      std::memcpy(&bits, buf.data() + offset + i * 8 + static_cast<std::size_t>(j) * 4, 4);
      f[j] = std::bit_cast<float>(to_le(bits));
    }
    out[i] = Cx{f[0], f[1]};
  }
}

auto crc_hex(std::vector<unsigned char> const &buf) -> std::string
{
  auto const crc = crc32(0L, buf.data(), static_cast<uInt>(buf.size()));
  char s[16];
  std::snprintf(s, sizeof s, "%08lx", static_cast<unsigned long>(crc));
  return s;
}

void write_blob(fs::path const &dir, std::string const &name, std::vector<unsigned char> const &buf, KeyValue &manifest)
{
  std::ofstream out{dir / name, std::ios::binary | std::ios::trunc};
  if (!out) { throw FormatError("cannot write '" + (dir / name).string() + "'"); }
  out.write(reinterpret_cast<char const *>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) { throw FormatError("write failed for '" + (dir / name).string() + "'"); }
  manifest.set("crc32." + name, crc_hex(buf));
}

auto read_blob(fs::path const &dir, std::string const &name, std::size_t expected, KeyValue const &manifest)
  -> std::vector<unsigned char>
{
  auto const path = dir / name;
  std::ifstream in{path, std::ios::binary};
  if (!in) { throw FormatError("cannot read '" + path.string() + "'"); }
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() != expected) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(buf.size()) + " bytes, expected " +
                      std::to_string(expected) + " (truncated or malformed)");
  }
  if (crc_hex(buf) != manifest.get("crc32." + name)) { throw FormatError("checksum mismatch for '" + path.string() + "'"); }
  return buf;
}

auto join(std::vector<long> const &v) -> std::string
{
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + std::to_string(v[i]);
  }
  return s;
}

auto split_longs(std::string const &s, std::string const &key) -> std::vector<long>
{
  std::vector<long> out;
  std::stringstream ss{s};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stol(tok));
    } catch (std::exception const &) {
      throw FormatError("manifest key '" + key + "' has a non-integer entry '" + tok + "'");
    }
  }
  return out;
}

auto positive(KeyValue const &kv, std::string const &key) -> long
{
  long const v = kv.get_long(key);
  if (v <= 0) { throw FormatError(kv.origin() + ": key '" + key + "' must be positive"); }
  return v;
}

} // namespace

auto generate_dataset(DatasetSpec const &spec) -> Dataset
{
  auto family = make_family(spec.w, spec.R, spec.acs, spec.variant);
  Dataset d;
  d.info.h = spec.h;
  d.info.w = spec.w;
  d.info.coils = spec.coils;
  d.info.R = spec.R;
  d.info.acs = spec.acs;
  d.info.variant = spec.variant;
  d.info.offsets = family.offsets;
  d.info.sigma = spec.sigma;
  d.info.master_seed = spec.master_seed;
  d.coils = simulate_coils(spec.h, spec.w, spec.coils);
  quantize_all(d.coils.maps.begin(), d.coils.maps.end());
  for (long i = 0; i < spec.n_pairs; ++i) {
    auto const phantom = generate_phantom(derive_seed(spec.master_seed, 2 * static_cast<std::uint64_t>(i)), spec.h, spec.w);
    Rng rng{derive_seed(spec.master_seed, 2 * static_cast<std::uint64_t>(i) + 1)};
    auto pair = simulate_pair(phantom, d.coils, family, spec.sigma, rng);
    quantize_all(pair.y.data.begin(), pair.y.data.end());
    quantize_all(pair.y_prime.data.begin(), pair.y_prime.data.end());
    quantize_all(pair.groundtruth->data.begin(), pair.groundtruth->data.end());
    d.add(std::move(pair));
  }
  d.info.n_pairs = d.size();
  return d;
}

void write_dataset(fs::path const &dir, Dataset const &d)
{
  fs::create_directories(dir);
  auto const &i = d.info;
  KeyValue m;
  m.set("format", std::string{"deqmri-dataset"});
  m.set("version", i.version);
  m.set("h", i.h);
  m.set("w", i.w);
  m.set("coils", i.coils);
  m.set("R", i.R);
  m.set("variant", std::string{to_string(i.variant)});
  m.set("acs", i.acs);
  m.set("offsets", join(i.offsets));
  m.set("sigma", i.sigma);
  m.set("n_pairs", d.size());
  m.set("master_seed", i.master_seed);
  m.set("dtype", std::string{"complex64-le"});
  m.set("has_groundtruth", d.has_groundtruth() ? 1L : 0L);

  std::size_t const plane = static_cast<std::size_t>(i.h * i.w);
  std::vector<unsigned char> buf;
  append_c64(buf, d.coils.maps.data(), d.coils.maps.size());
  write_blob(dir, "coils.c64", buf, m);

  auto write_k = [&](std::string const &name, auto member) {
    std::vector<unsigned char> b;
    for (auto const &p : d.pairs) {
      auto const &k = p.*member;
      append_c64(b, k.data.data(), k.data.size());
    }
    write_blob(dir, name, b, m);
  };
  write_k("y.c64", &TrainingPair::y);
  write_k("y_prime.c64", &TrainingPair::y_prime);

  auto write_mask = [&](std::string const &name, auto member) {
    std::vector<unsigned char> b;
    for (auto const &p : d.pairs) {
      auto const &mask = p.*member;
      b.insert(b.end(), mask.lines.begin(), mask.lines.end());
    }
    write_blob(dir, name, b, m);
  };
  write_mask("mask.u8", &TrainingPair::mask);
  write_mask("mask_prime.u8", &TrainingPair::mask_prime);

  if (d.has_groundtruth()) {
    std::vector<unsigned char> b;
    b.reserve(d.gt_.size() * plane * 8);
    // Serialising is not a training read; bypasses the audit counter.
    for (auto const &g : d.gt_) {
      append_c64(b, g.data.data(), g.data.size());
    }
    write_blob(dir, "groundtruth.c64", b, m);
  }
  m.save(dir / "manifest.txt");
}

auto read_dataset(fs::path const &dir) -> Dataset
{
  auto const m = KeyValue::load(dir / "manifest.txt");
  if (m.get("format") != "deqmri-dataset") { throw FormatError(m.origin() + ": not a dataset manifest"); }
  if (m.get_long("version") != 1) { throw FormatError(m.origin() + ": unsupported version " + m.get("version")); }
  if (m.get("dtype") != "complex64-le") { throw FormatError(m.origin() + ": unsupported dtype " + m.get("dtype")); }
  Dataset d;
  auto &i = d.info;
  i.h = positive(m, "h");
  i.w = positive(m, "w");
  i.coils = positive(m, "coils");
  i.R = positive(m, "R");
  i.acs = m.get_long("acs");
  try {
    i.variant = parse_variant(m.get("variant"));
  } catch (ArgumentError const &e) {
    throw FormatError(m.origin() + ": " + e.what());
  }
  i.offsets = split_longs(m.get("offsets"), "offsets");
  i.sigma = m.get_double("sigma");
  i.n_pairs = m.get_long("n_pairs");
  if (i.n_pairs < 0) { throw FormatError(m.origin() + ": negative n_pairs"); }
  i.master_seed = m.get_u64("master_seed");

  auto const n = static_cast<std::size_t>(i.n_pairs);
  auto const plane = static_cast<std::size_t>(i.h * i.w);
  auto const kplane = plane * static_cast<std::size_t>(i.coils);

  auto cb = read_blob(dir, "coils.c64", kplane * 8, m);
  d.coils = CoilSensitivities{i.coils, i.h, i.w, std::vector<Cx>(kplane)};
  read_c64(cb, 0, d.coils.maps.data(), kplane);

  auto yb = read_blob(dir, "y.c64", n * kplane * 8, m);
  auto ypb = read_blob(dir, "y_prime.c64", n * kplane * 8, m);
  auto mb = read_blob(dir, "mask.u8", n * static_cast<std::size_t>(i.w), m);
  auto mpb = read_blob(dir, "mask_prime.u8", n * static_cast<std::size_t>(i.w), m);
  std::vector<unsigned char> gb;
  bool const has_gt = m.get_long("has_groundtruth") != 0;
  if (has_gt) { gb = read_blob(dir, "groundtruth.c64", n * plane * 8, m); }

  MaskFamily family;
  try {
    family = d.family();
  } catch (ArgumentError const &e) {
    throw FormatError(m.origin() + ": inconsistent family description: " + e.what());
  }
  auto load_mask = [&](std::vector<unsigned char> const &b, std::size_t k) {
    SamplingMask mask;
    auto const w = static_cast<std::size_t>(i.w);
    mask.lines.assign(b.begin() + static_cast<long>(k * w), b.begin() + static_cast<long>((k + 1) * w));
    for (auto v : mask.lines) {
      if (v > 1) { throw FormatError(m.origin() + ": mask byte outside {0,1}"); }
    }
    if (auto id = find_member(family, mask); id >= 0) { mask = family.members[static_cast<std::size_t>(id)]; }
    return mask;
  };
  for (std::size_t k = 0; k < n; ++k) {
    TrainingPair p;
    p.mask = load_mask(mb, k);
    p.mask_prime = load_mask(mpb, k);
    p.y = KSpace(i.coils, i.h, i.w);
    p.y.mask_id = p.mask.id;
    read_c64(yb, k * kplane * 8, p.y.data.data(), kplane);
    p.y_prime = KSpace(i.coils, i.h, i.w);
    p.y_prime.mask_id = p.mask_prime.id;
    read_c64(ypb, k * kplane * 8, p.y_prime.data.data(), kplane);
    if (has_gt) {
      ComplexImage g(i.h, i.w);
      read_c64(gb, k * plane * 8, g.data.data(), plane);
      p.groundtruth = std::move(g);
    }
    d.add(std::move(p));
  }
  return d;
}

void write_images(fs::path const &dir, std::vector<ComplexImage> const &images)
{
  fs::create_directories(dir);
  KeyValue m;
  m.set("format", std::string{"deqmri-images"});
  m.set("version", 1L);
  long const h = images.empty() ? 0 : images.front().h;
  long const w = images.empty() ? 0 : images.front().w;
  m.set("n", static_cast<long>(images.size()));
  m.set("h", h);
  m.set("w", w);
  m.set("dtype", std::string{"complex64-le"});
  std::vector<unsigned char> buf;
  for (auto const &im : images) {
    if (im.h != h || im.w != w) { throw DimensionError("write_images: images differ in shape"); }
    append_c64(buf, im.data.data(), im.data.size());
  }
  write_blob(dir, "images.c64", buf, m);
  m.save(dir / "manifest.txt");
}

auto read_images(fs::path const &dir) -> std::vector<ComplexImage>
{
  auto const m = KeyValue::load(dir / "manifest.txt");
  if (m.get("format") != "deqmri-images") { throw FormatError(m.origin() + ": not an image-stack manifest"); }
  long const n = m.get_long("n"), h = m.get_long("h"), w = m.get_long("w");
  if (n < 0 || h < 0 || w < 0) { throw FormatError(m.origin() + ": negative dimension"); }
  auto const plane = static_cast<std::size_t>(h * w);
  auto buf = read_blob(dir, "images.c64", static_cast<std::size_t>(n) * plane * 8, m);
  std::vector<ComplexImage> out;
  for (long k = 0; k < n; ++k) {
    ComplexImage im(h, w);
    read_c64(buf, static_cast<std::size_t>(k) * plane * 8, im.data.data(), plane);
    out.push_back(std::move(im));
  }
  return out;
}

} // namespace deqmri
