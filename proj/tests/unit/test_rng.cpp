#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "xmt/rng.hpp"

using xmt::RngStream;

TEST(Rng, MatchesReferenceSplitmixSequence) {
  // Published splitmix64 output for state 0.
  RngStream r(0);
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(r.next_u64(), 0x06C45D188009454FULL);
}

TEST(Rng, StateIsSeedAndCounter) {
  RngStream a(42);
  for (int i = 0; i < 7; ++i) a.next_u64();
  RngStream b(42, 7);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformInUnitInterval) {
  RngStream r(3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  RngStream r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
  EXPECT_EQ(r.counter(), 2u * n);
}

TEST(Rng, BelowCoversRange) {
  RngStream r(5);
  std::vector<int> hits(6, 0);
  for (int i = 0; i < 6000; ++i) ++hits[r.below(6)];
  for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, ShuffleIsPermutationAndReproducible) {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  RngStream r1(11), r2(11);
  r1.shuffle(std::span(a));
  r2.shuffle(std::span(b));
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(a, sorted);
}

TEST(Rng, DerivedStreamsAreIndependentOfParentCounter) {
  RngStream a(1);
  RngStream b(1);
  b.next_u64();
  EXPECT_EQ(a.derive(4).next_u64(), b.derive(4).next_u64());
  EXPECT_NE(a.derive(4).next_u64(), a.derive(5).next_u64());
}
