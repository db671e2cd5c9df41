#pragma once

// Synthetic phantoms and coil maps, paired undersampled acquisitions of the
// same object, and the on-disk dataset format.
//
// Dataset directory layout:
//   manifest.txt       flat key = value (version, h, w, coils, R, variant, acs,
//                      offsets, sigma, n_pairs, master_seed, dtype, crc32.*)
//   coils.c64          (coils, h, w)           complex64, little-endian, re/im interleaved
//   y.c64, y_prime.c64 (n_pairs, coils, h, w)  complex64
//   mask.u8, mask_prime.u8 (n_pairs, w)        0/1 line flags
//   groundtruth.c64    (n_pairs, h, w)         complex64, optional

#include "deqmri/linops.hpp"
#include "deqmri/sampling.hpp"
#include "deqmri/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace deqmri {

struct Phantom
{
  ComplexImage image;
  std::uint64_t seed = 0;
};

struct TrainingPair
{
  KSpace y;
  SamplingMask mask;
  KSpace y_prime;
  SamplingMask mask_prime;
  std::optional<ComplexImage> groundtruth;
};

// splitmix64 of (master, stream); used to give every pair its own RNG stream.
auto derive_seed(std::uint64_t master, std::uint64_t stream) -> std::uint64_t;

// Random ellipses with a smooth intensity modulation and smooth phase; max |x| == 1.
auto generate_phantom(std::uint64_t seed, long h, long w) -> Phantom;

// Gaussian-lobe magnitudes centred on a ring (quadrant centres for c = 4),
// linear phase, normalised so sum_c |S_c|^2 == 1.
auto simulate_coils(long h, long w, long c) -> CoilSensitivities;

// Two independent mask draws and two independent complex AWGN draws (std sigma
// per real/imag component, sampled entries only) of the same object.
auto simulate_pair(Phantom const &x, CoilSensitivities const &s, MaskFamily const &family, double sigma, Rng &rng)
  -> TrainingPair;

// Adds complex AWGN (std sigma per real/imag part) on the lines of `mask`.
void add_measurement_noise(KSpace &y, SamplingMask const &mask, double sigma, Rng &rng);

// Same with both masks given.
auto simulate_pair(ComplexImage const &x, CoilSensitivities const &s, SamplingMask const &mask,
                   SamplingMask const &mask_prime, double sigma, Rng &rng) -> TrainingPair;

struct DatasetInfo
{
  long version = 1;
  long h = 0;
  long w = 0;
  long coils = 0;
  long R = 0;
  long acs = 0;
  Variant variant = Variant::full;
  std::vector<long> offsets;
  double sigma = 0.0;
  long n_pairs = 0;
  std::uint64_t master_seed = 0;
};

class Dataset;

// While alive, any groundtruth read on the dataset throws AccessError.
class GroundtruthLock
{
public:
  explicit GroundtruthLock(Dataset const &d);
  ~GroundtruthLock();
  GroundtruthLock(GroundtruthLock const &) = delete;
  auto operator=(GroundtruthLock const &) -> GroundtruthLock & = delete;

private:
  Dataset const &d_;
};

class Dataset
{
public:
  DatasetInfo info;
  CoilSensitivities coils;
  std::vector<TrainingPair> pairs; // groundtruth fields are always empty here

  auto size() const -> long { return static_cast<long>(pairs.size()); }
  auto family() const -> MaskFamily;

  // Moves any groundtruth out of the pair into the guarded store.
  void add(TrainingPair pair);

  auto has_groundtruth() const -> bool { return !gt_.empty(); }
  auto groundtruth(long i) const -> ComplexImage const &;
  auto groundtruth_reads() const -> long { return reads_; }
  auto deny_groundtruth() const -> GroundtruthLock { return GroundtruthLock{*this}; }
  auto groundtruth_denied() const -> bool { return deny_depth_ > 0; }

  // Drop all groundtruth (used when exporting measurement-only datasets).
  void strip_groundtruth() { gt_.clear(); }

private:
  friend class GroundtruthLock;
  friend void write_dataset(std::filesystem::path const &dir, Dataset const &d);
  std::vector<ComplexImage> gt_;
  mutable long reads_ = 0;
  mutable int deny_depth_ = 0;
};

struct DatasetSpec
{
  long n_pairs = 8;
  long h = 32;
  long w = 32;
  long coils = 4;
  long R = 4;
  long acs = 4;
  Variant variant = Variant::full;
  double sigma = 0.01;
  std::uint64_t master_seed = 0;
};

// Deterministic in spec. Arrays are rounded to float32 so the stored dataset
// round-trips bit-exactly.
auto generate_dataset(DatasetSpec const &spec) -> Dataset;

void write_dataset(std::filesystem::path const &dir, Dataset const &d);
auto read_dataset(std::filesystem::path const &dir) -> Dataset;

// Image stacks (reconstructions) in the same array format with their own manifest.
void write_images(std::filesystem::path const &dir, std::vector<ComplexImage> const &images);
auto read_images(std::filesystem::path const &dir) -> std::vector<ComplexImage>;

} // namespace deqmri
