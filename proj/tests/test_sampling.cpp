#include "doctest.h"
#include "deqmri/sampling.hpp"
#include "deqmri/types.hpp"

#include <set>

using namespace deqmri;

namespace {

auto union_count(MaskFamily const &f) -> long
{
  long n = 0;
  for (long k = 0; k < f.w; ++k) {
    bool any = false;
    for (auto const &m : f.members) {
      any = any || m.contains(k);
    }
    n += any ? 1 : 0;
  }
  return n;
}

} // namespace

TEST_CASE("full-scale R=4 family with 92/R ACS lines")
{
  CHECK(acs_lines_for(4) == 23);
  CHECK(acs_lines_for(6) == 15);
  CHECK(acs_lines_for(8) == 11);
  auto const f = make_family(232, 4, acs_lines_for(4), Variant::full);
  CHECK(f.size() == 4);
  for (auto const &m : f.members) {
    double const rate = static_cast<double>(m.count()) / 232.0;
    CHECK(rate > 0.29);
    CHECK(rate < 0.33);
  }
  auto const f8 = make_family(232, 8, acs_lines_for(8), Variant::full);
  for (auto const &m : f8.members) {
    double const rate = static_cast<double>(m.count()) / 232.0;
    CHECK(rate > 0.15);
    CHECK(rate < 0.18);
  }
}

TEST_CASE("w=8 R=2 no ACS gives even and odd lines")
{
  auto const f = make_family(8, 2, 0, Variant::full);
  REQUIRE(f.size() == 2);
  CHECK(f.members[0].lines == std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0, 1, 0});
  CHECK(f.members[1].lines == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1, 0, 1});
  CHECK(union_count(f) == 8);
  CHECK(f.members[0].acs_size() == 0);
}

TEST_CASE("w=8 R=4 deficient covers half the lines")
{
  auto const f = make_family(8, 4, 0, Variant::deficient);
  CHECK(f.size() == 2);
  CHECK(f.offsets == std::vector<long>{0, 2});
  CHECK(union_count(f) == 4);
}

TEST_CASE("family structure invariants")
{
  for (long w : {8L, 16L, 24L, 32L, 64L}) {
    for (long R : {2L, 4L}) {
      for (long acs : {0L, 1L, 2L, 3L}) {
        if (acs >= w / R) { continue; }
        auto const f = make_family(w, R, acs, Variant::full);
        CHECK(f.size() == R);
        CHECK(union_count(f) == w);
        auto const freq = line_frequency(f);
        for (double p : freq) {
          CHECK(p > 0.0);
        }
        for (long r = 0; r < R; ++r) {
          auto const &m = f.members[static_cast<std::size_t>(r)];
          CHECK(m.id == r);
          CHECK(m.acs_size() == acs);
          for (long k = m.acs_first; k <= m.acs_last; ++k) {
            CHECK(m.contains(k));
          }
          for (long k = 0; k < w; ++k) {
            bool const acs_line = k >= m.acs_first && k <= m.acs_last;
            CHECK(m.contains(k) == (acs_line || k % R == r));
          }
          // individually undersampled: w/R equispaced lines plus at most acs extra
          CHECK(m.count() >= w / R);
          CHECK(m.count() <= w / R + acs);
        }

        auto const d = make_family(w, R, acs, Variant::deficient);
        CHECK(d.size() == (R + 1) / 2);
        auto const fd = line_frequency(d);
        long zeros = 0, non_acs_odd = 0;
        for (long k = 0; k < w; ++k) {
          bool const acs_line = k >= d.members[0].acs_first && k <= d.members[0].acs_last;
          if (fd[static_cast<std::size_t>(k)] == 0.0) {
            CHECK(!acs_line);
            ++zeros;
          }
          if (!acs_line && k % 2 == 1) { ++non_acs_odd; }
        }
        // the even offsets sample every even line, so exactly the odd non-ACS lines are missing
        CHECK(zeros == non_acs_odd);
        if (acs % 2 == 0) { CHECK(zeros == (w - acs) / 2); }
      }
    }
  }
}

TEST_CASE("make_family argument errors")
{
  CHECK_THROWS_AS(make_family(8, 1, 0, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(8, 16, 0, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(8, 2, 8, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(8, 2, 9, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(8, 2, -1, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(10, 4, 0, Variant::full), ArgumentError);
  CHECK_THROWS_AS(make_family(16, 4, 4, Variant::full), ArgumentError); // acs must be < w/R
  CHECK_THROWS_AS(make_family(16, 4, 0, std::vector<long>{}), ArgumentError);
  CHECK_THROWS_AS(make_family(16, 4, 0, std::vector<long>{4}), ArgumentError);
  CHECK_THROWS_AS(parse_variant("half"), ArgumentError);
  CHECK(parse_variant("deficient") == Variant::deficient);
}

TEST_CASE("draw_mask")
{
  SUBCASE("single-member family always returns it")
  {
    auto const f = make_family(8, 4, 0, std::vector<long>{3});
    Rng rng{1};
    for (int i = 0; i < 50; ++i) {
      CHECK(draw_mask(f, rng) == f.members[0]);
    }
  }
  SUBCASE("uniform over an R=4 family")
  {
    auto const f = make_family(16, 4, 2, Variant::full);
    Rng rng{2};
    std::vector<long> counts(4, 0);
    long const n = 100000;
    for (long i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(draw_mask(f, rng).id)];
    }
    double chi2 = 0.0;
    for (long c : counts) {
      double const p = static_cast<double>(c) / static_cast<double>(n);
      CHECK(std::abs(p - 0.25) < 0.01);
      chi2 += (static_cast<double>(c) - n / 4.0) * (static_cast<double>(c) - n / 4.0) / (n / 4.0);
    }
    CHECK(chi2 < 16.27); // 3 dof, p = 0.001
  }
  SUBCASE("same seed, same sequence")
  {
    auto const f = make_family(16, 4, 2, Variant::full);
    Rng a{99}, b{99};
    for (int i = 0; i < 100; ++i) {
      CHECK(draw_index(f, a) == draw_index(f, b));
    }
  }
  SUBCASE("empty family")
  {
    MaskFamily f;
    Rng rng{3};
    CHECK_THROWS_AS(draw_mask(f, rng), ArgumentError);
  }
}

TEST_CASE("find_member")
{
  auto const f = make_family(16, 4, 2, Variant::full);
  CHECK(find_member(f, f.members[2]) == 2);
  CHECK(find_member(f, full_mask(16)) == -1);
}
