#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dwa/selfcheck.hpp"
#include "dwa/wavelet.hpp"

namespace dwa {
namespace {

using selfcheck::random_tensor;

// 2x2 Haar filter bank on one block (a b / c d), written out by hand.
struct Block {
  double a, h, v, d;
};
Block haar_block(double a, double b, double c, double d) {
  return {(a + b + c + d) / 2, (a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2};
}

TEST(Dwt2, ConstantHasNoDetail) {
  const auto s = dwt2(Tensor<double>::create({1, 1, 2, 2}, {1, 1, 1, 1}));
  ASSERT_EQ(s.shape(), (Shape{1, 4, 1, 1}));
  EXPECT_EQ(s[0], 2.0);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_EQ(s[3], 0.0);
}

TEST(Dwt2, TwoByTwoExample) {
  const auto s = dwt2(Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3, 4}));
  const Block o = haar_block(1, 2, 3, 4);
  EXPECT_EQ(o.a, 5.0);
  EXPECT_EQ(o.h, -1.0);
  EXPECT_EQ(o.v, -2.0);
  EXPECT_EQ(o.d, 0.0);
  EXPECT_EQ(s[0], o.a);
  EXPECT_EQ(s[1], o.h);
  EXPECT_EQ(s[2], o.v);
  EXPECT_EQ(s[3], o.d);
}

TEST(Dwt2, MatchesBlockOracleOnRandomInput) {
  Rng rng(2);
  const auto x = random_tensor<double>({2, 3, 6, 8}, rng);
  const auto s = dwt2(x);
  ASSERT_EQ(s.shape(), (Shape{2, 12, 3, 4}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          const Block o = haar_block(x(n, c, 2 * i, 2 * j), x(n, c, 2 * i, 2 * j + 1), x(n, c, 2 * i + 1, 2 * j),
                                     x(n, c, 2 * i + 1, 2 * j + 1));
          EXPECT_NEAR(s(n, c, i, j), o.a, 1e-15);
          EXPECT_NEAR(s(n, 3 + c, i, j), o.h, 1e-15);
          EXPECT_NEAR(s(n, 6 + c, i, j), o.v, 1e-15);
          EXPECT_NEAR(s(n, 9 + c, i, j), o.d, 1e-15);
        }
}

TEST(Dwt2, OddSizeRejected) {
  EXPECT_THROW(
      {
        try {
          dwt2(Tensor<double>::zeros({1, 1, 3, 4}));
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::OddSpatialSize);
          throw;
        }
      },
      Error);
}

TEST(Idwt2, ApproximationOnly) {
  const auto x = idwt2(Tensor<double>::create({1, 4, 1, 1}, {2, 0, 0, 0}));
  for (const double v : x.data()) EXPECT_EQ(v, 1.0);
  const auto back = dwt2(x);
  EXPECT_EQ(back[0], 2.0);
}

TEST(Idwt2, ZeroSubbandsGiveZeroImage) {
  const auto x = idwt2(Tensor<double>::zeros({1, 8, 5, 3}));
  EXPECT_EQ(x.shape(), (Shape{1, 2, 10, 6}));
  for (const double v : x.data()) EXPECT_EQ(v, 0.0);
}

TEST(Idwt2, ChannelsNotDivisibleBy4) {
  try {
    idwt2(Tensor<double>::zeros({1, 6, 2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChannelNotDivisibleBy4);
  }
}

TEST(Idwt2, RoundTrip64x64Float) {
  Rng rng(3);
  const auto x = random_tensor<float>({1, 3, 64, 64}, rng);
  const auto y = idwt2(dwt2(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-6);
}

TEST(Wavelet, RoundTripOverManyShapes) {
  const auto f = selfcheck::wavelet_round_trip<float>(1000, 1e-6);
  EXPECT_TRUE(f.pass) << f.detail;
  const auto d = selfcheck::wavelet_round_trip<double>(1000, 1e-12);
  EXPECT_TRUE(d.pass) << d.detail;
}

TEST(Wavelet, EnergyPreserved) {
  const auto r = selfcheck::wavelet_energy(200, 1e-9);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Wavelet, AreaQuartersChannelsQuadruple) {
  const auto s = dwt2(Tensor<double>::zeros({2, 5, 12, 20}));
  EXPECT_EQ(s.shape(), (Shape{2, 20, 6, 10}));
}

TEST(Wavelet, AdjointPairing) {
  // Orthonormal: <dwt2(x), y> == <x, idwt2(y)>.
  Rng rng(4);
  const auto x = random_tensor<double>({1, 2, 6, 4}, rng);
  const auto y = random_tensor<double>({1, 8, 3, 2}, rng);
  const auto dx = dwt2(x);
  const auto iy = idwt2(y);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) lhs += dx[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * iy[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(DwtMulti, OneLevelEqualsDwt2) {
  Rng rng(5);
  const auto x = random_tensor<double>({1, 3, 8, 8}, rng);
  const auto stacks = dwt_multi(x, 1);
  ASSERT_EQ(stacks.size(), 1u);
  const auto ref = dwt2(x);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(stacks[0][i], ref[i]);
}

TEST(DwtMulti, TwoLevelsOnConstant) {
  const auto stacks = dwt_multi(Tensor<double>::filled({1, 1, 8, 8}, 3.0), 2);
  ASSERT_EQ(stacks.size(), 2u);
  const auto& deep = stacks[1];
  ASSERT_EQ(deep.shape(), (Shape{1, 16, 2, 2}));
  for (std::size_t c = 0; c < 16; ++c)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(deep(0, c, i, j), c == 0 ? 12.0 : 0.0) << "channel " << c;
}

TEST(DwtMulti, InverseChainFloat) {
  Rng rng(6);
  const auto x = random_tensor<float>({1, 3, 16, 12}, rng);
  const auto y = idwt_multi(dwt_multi(x, 2).back(), 2);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5);
}

TEST(DwtMulti, NotDivisible) {
  try {
    dwt_multi(Tensor<double>::zeros({1, 1, 12, 12}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDivisible);
  }
}

TEST(Subbands, SplitMatchesChannelGroups) {
  const auto s = dwt2(Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3, 4}));
  const auto parts = split_subbands(s);
  EXPECT_EQ(parts.approx[0], 5.0);
  EXPECT_EQ(parts.horizontal[0], -1.0);
  EXPECT_EQ(parts.vertical[0], -2.0);
  EXPECT_EQ(parts.diagonal[0], 0.0);
}

}  // namespace
}  // namespace dwa
