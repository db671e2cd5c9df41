#pragma once

// Named verification suites shared by the CLI and the acceptance binary.
//   adjoint        50 random instances, 8..64 pixels a side, 1..4 coils
//   expectation    R in {2, 4}, with and without ACS, 8..64 lines, plus the unweighted R=2 control
//   jfb-exact      10 random (theta, phantom, mask) at 16x16, R=4, sigma = 0, exact enumeration over M'
//   jfb-mc         sigma = 0.01, N in {1e2, 1e3, 1e4} random (M', e') draws

#include "deqmri/sampling.hpp"
#include "deqmri/verify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deqmri {

struct SuiteOptions
{
  Variant family = Variant::full;
  std::uint64_t seed = 0;
  long mc_repeats = 32;
};

auto suite_names() -> std::vector<std::string> const &;

// "all" runs every suite in order. Unknown names throw ArgumentError.
auto run_suite(std::string const &name, SuiteOptions const &opt) -> std::vector<VerificationReport>;

} // namespace deqmri
