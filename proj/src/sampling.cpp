#include "deqmri/sampling.hpp"
#include "deqmri/types.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace deqmri {

auto SamplingMask::count() const -> long
{
  return static_cast<long>(std::count_if(lines.begin(), lines.end(), [](auto v) { return v != 0; }));
}

auto full_mask(long w) -> SamplingMask
{
  SamplingMask m;
  m.lines.assign(static_cast<std::size_t>(w), 1);
  return m;
}

auto to_string(Variant v) -> char const * { return v == Variant::full ? "full" : "deficient"; }

auto parse_variant(std::string const &s) -> Variant
{
  if (s == "full") { return Variant::full; }
  if (s == "deficient") { return Variant::deficient; }
  throw ArgumentError("unknown mask family variant '" + s + "' (expected full|deficient)");
}

auto acs_lines_for(long R) -> long
{
  if (R < 1) { throw ArgumentError("acs_lines_for: R must be positive"); }
  return 92 / R;
}

auto make_family(long w, long R, long acs, std::vector<long> const &offsets) -> MaskFamily
{
  if (R < 2) { throw ArgumentError("make_family: R must be >= 2, got " + std::to_string(R)); }
  if (R > w) { throw ArgumentError("make_family: R=" + std::to_string(R) + " exceeds line count " + std::to_string(w)); }
  if (acs < 0 || acs >= w) { throw ArgumentError("make_family: acs=" + std::to_string(acs) + " must lie in [0, w)"); }
  if (w % R != 0) { throw ArgumentError("make_family: w=" + std::to_string(w) + " not divisible by R=" + std::to_string(R)); }
  if (acs >= w / R) {
    throw ArgumentError("make_family: acs=" + std::to_string(acs) + " does not fit the per-mask budget w/R=" +
                        std::to_string(w / R));
  }
  if (offsets.empty()) { throw ArgumentError("make_family: empty offset list"); }

  MaskFamily f;
  f.w = w;
  f.R = R;
  f.acs = acs;
  long const first = w / 2 - acs / 2;
  for (long r : offsets) {
    if (r < 0 || r >= R) { throw ArgumentError("make_family: offset " + std::to_string(r) + " outside [0, R)"); }
    SamplingMask m;
    m.lines.assign(static_cast<std::size_t>(w), 0);
    for (long k = r; k < w; k += R) {
      m.lines[static_cast<std::size_t>(k)] = 1;
    }
    for (long k = first; k < first + acs; ++k) {
      m.lines[static_cast<std::size_t>(k)] = 1;
    }
    m.acs_first = first;
    m.acs_last = first + acs - 1;
    m.id = static_cast<long>(f.members.size());
    f.members.push_back(std::move(m));
    f.offsets.push_back(r);
  }
  return f;
}

auto make_family(long w, long R, long acs, Variant variant) -> MaskFamily
{
  std::vector<long> offsets;
  long const step = variant == Variant::full ? 1 : 2;
  for (long r = 0; r < R; r += step) {
    offsets.push_back(r);
  }
  auto f = make_family(w, R, acs, offsets);
  f.variant = variant;
  return f;
}

auto draw_index(MaskFamily const &family, Rng &rng) -> long
{
  if (family.members.empty()) { throw ArgumentError("draw_mask: empty family"); }
  std::uniform_int_distribution<long> pick(0, family.size() - 1);
  return pick(rng);
}

auto draw_mask(MaskFamily const &family, Rng &rng) -> SamplingMask
{
  return family.members[static_cast<std::size_t>(draw_index(family, rng))];
}

auto line_frequency(MaskFamily const &family) -> std::vector<double>
{
  std::vector<double> freq(static_cast<std::size_t>(family.w), 0.0);
  for (auto const &m : family.members) {
    for (long k = 0; k < family.w; ++k) {
      if (m.contains(k)) { freq[static_cast<std::size_t>(k)] += 1.0; }
    }
  }
  double const n = static_cast<double>(family.size());
  for (auto &f : freq) {
    f /= n;
  }
  return freq;
}

auto find_member(MaskFamily const &family, SamplingMask const &m) -> long
{
  for (long i = 0; i < family.size(); ++i) {
    if (family.members[static_cast<std::size_t>(i)] == m) { return i; }
  }
  return -1;
}

} // namespace deqmri
