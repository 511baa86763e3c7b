#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sdgd/random.hpp"

using sdgd::Purpose;
using sdgd::RngStream;

TEST(Philox, KnownAnswerVectors) {
  using A = std::array<std::uint32_t, 4>;
  EXPECT_EQ(sdgd::philox4x32({0, 0, 0, 0}, {0, 0}), (A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(sdgd::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(sdgd::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, IdenticalKeysGiveIdenticalDraws) {
  RngStream a(7, 3, Purpose::ResidualPoints);
  RngStream b(7, 3, Purpose::ResidualPoints);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a(), b());
}

TEST(RngStream, KeysSeparateStreams) {
  const auto first = [](RngStream s) { return s(); };
  const auto base = first(RngStream(7, 3, Purpose::ResidualPoints));
  EXPECT_NE(base, first(RngStream(8, 3, Purpose::ResidualPoints)));
  EXPECT_NE(base, first(RngStream(7, 4, Purpose::ResidualPoints)));
  EXPECT_NE(base, first(RngStream(7, 3, Purpose::BackwardDims)));
  EXPECT_NE(base, first(RngStream(7, 3, Purpose::ResidualPoints, 1)));
}

TEST(RngStream, InterleavingDoesNotPerturbSequences) {
  RngStream a(1, 0, Purpose::BackwardDims), b(1, 0, Purpose::ForwardDims);
  std::vector<std::uint64_t> sa, sb;
  for (int k = 0; k < 200; ++k) sa.push_back(a());
  for (int k = 0; k < 200; ++k) sb.push_back(b());

  RngStream c(1, 0, Purpose::BackwardDims), e(1, 0, Purpose::ForwardDims);
  for (int k = 0; k < 200; ++k) {
    ASSERT_EQ(c(), sa[k]);
    ASSERT_EQ(e(), sb[k]);
  }
}

TEST(RngStream, CopyReplaysFromCurrentPosition) {
  RngStream a(5, 0, Purpose::Init);
  for (int k = 0; k < 3; ++k) a();
  RngStream b = a;
  EXPECT_EQ(a.position(), 3u);
  for (int k = 0; k < 10; ++k) ASSERT_EQ(a(), b());
}

TEST(RngStream, UniformMomentsAndRange) {
  RngStream s(11, 0, Purpose::Analysis);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum2 / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(RngStream, PurposeStreamsUncorrelated) {
  RngStream a(3, 0, Purpose::BackwardDims), b(3, 0, Purpose::ForwardDims);
  const int n = 100000;
  double sab = 0.0;
  for (int k = 0; k < n; ++k) sab += (a.uniform() - 0.5) * (b.uniform() - 0.5);
  // Standard error of the product mean is 1/12/sqrt(n).
  EXPECT_LT(std::abs(sab / n), 4.0 / 12.0 / std::sqrt(n));
}
