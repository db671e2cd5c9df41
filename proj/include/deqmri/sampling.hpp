#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace deqmri {

using Rng = std::mt19937_64;

// Cartesian line mask along k_y: lines[k] != 0 means column k of k-space is acquired.
struct SamplingMask
{
  std::vector<std::uint8_t> lines;
  long acs_first = 0; // inclusive ACS interval; empty when acs_last < acs_first
  long acs_last = -1;
  long id = -1;       // index within the producing family, -1 if ad hoc

  auto width() const -> long { return static_cast<long>(lines.size()); }
  auto count() const -> long;
  auto contains(long k) const -> bool { return lines[static_cast<std::size_t>(k)] != 0; }
  auto acs_size() const -> long { return acs_last >= acs_first ? acs_last - acs_first + 1 : 0; }
  auto operator==(SamplingMask const &o) const -> bool { return lines == o.lines; }
};

auto full_mask(long w) -> SamplingMask;

enum class Variant
{
  full,
  deficient
};

auto to_string(Variant v) -> char const *;
auto parse_variant(std::string const &s) -> Variant;

// Finite set of equispaced masks sharing a centred ACS block, drawn uniformly.
struct MaskFamily
{
  std::vector<SamplingMask> members;
  std::vector<long> offsets; // equispacing offset of each member
  long w = 0;
  long R = 0;
  long acs = 0;
  Variant variant = Variant::full;

  auto size() const -> long { return static_cast<long>(members.size()); }
};

// ACS block size used at full scale for acceleration R: floor(92 / R).
auto acs_lines_for(long R) -> long;

// Full variant: R members, member r holds lines k == r (mod R) plus the ACS block.
// Deficient variant: only the even offsets {0, 2, ...}, so the union of the
// equispaced lines is half of k-space.
auto make_family(long w, long R, long acs, Variant variant) -> MaskFamily;

// Same construction with an explicit list of offsets in [0, R).
auto make_family(long w, long R, long acs, std::vector<long> const &offsets) -> MaskFamily;

auto draw_index(MaskFamily const &family, Rng &rng) -> long;
auto draw_mask(MaskFamily const &family, Rng &rng) -> SamplingMask;

// Probability that each line is acquired under the uniform family distribution.
auto line_frequency(MaskFamily const &family) -> std::vector<double>;

// Index of the member equal to m, or -1.
auto find_member(MaskFamily const &family, SamplingMask const &m) -> long;

} // namespace deqmri
