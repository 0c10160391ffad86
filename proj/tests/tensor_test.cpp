#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dwa/conv.hpp"
#include "dwa/gradcheck.hpp"
#include "dwa/loss.hpp"
#include "dwa/ops.hpp"
#include "dwa/selfcheck.hpp"
#include "dwa/tensor.hpp"

namespace dwa {
namespace {

using selfcheck::random_tensor;

template <typename F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Direct nested-loop convolution over clamped / zero-padded indices.
std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                PaddingMode mode) {
  const Shape s = x.shape();
  const std::size_t co = w.shape().n;
  const long k = static_cast<long>(w.shape().h);
  const long r = k / 2;
  std::vector<double> out(s.n * co * s.h * s.w);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < co; ++o)
      for (long i = 0; i < static_cast<long>(s.h); ++i)
        for (long j = 0; j < static_cast<long>(s.w); ++j) {
          double acc = b[o];
          for (std::size_t c = 0; c < s.c; ++c)
            for (long ky = 0; ky < k; ++ky)
              for (long kx = 0; kx < k; ++kx) {
                long si = i + ky - r, sj = j + kx - r;
                const bool inside = si >= 0 && sj >= 0 && si < static_cast<long>(s.h) && sj < static_cast<long>(s.w);
                if (!inside && mode == PaddingMode::zero) continue;
                si = std::clamp(si, 0L, static_cast<long>(s.h) - 1);
                sj = std::clamp(sj, 0L, static_cast<long>(s.w) - 1);
                acc += w(o, c, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                       x(n, c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
              }
          out[((n * co + o) * s.h + static_cast<std::size_t>(i)) * s.w + static_cast<std::size_t>(j)] = acc;
        }
  return out;
}

ConvParams<double> make_conv(std::size_t ci, std::size_t co, std::size_t k, std::vector<double> w,
                             std::vector<double> b, PaddingMode mode = PaddingMode::replicate) {
  return ConvParams<double>::make(Tensor<double>::parameter({co, ci, k, k}, std::move(w)),
                                  Tensor<double>::parameter({1, co, 1, 1}, std::move(b)), mode);
}

TEST(TensorNew, StoresValuesRowMajor) {
  const auto t = Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(t(0, 0, 0, 0), 1);
  EXPECT_EQ(t(0, 0, 0, 1), 2);
  EXPECT_EQ(t(0, 0, 1, 0), 3);
  EXPECT_EQ(t(0, 0, 1, 1), 4);
  EXPECT_FALSE(t.requires_grad());
}

TEST(TensorNew, RejectsLengthMismatch) {
  expect_error(ErrorCode::ShapeMismatch, [] { Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3}); });
}

TEST(TensorNew, RejectsNonFinite) {
  expect_error(ErrorCode::NonFiniteValue,
               [] { Tensor<double>::create({1, 1, 1, 1}, {std::numeric_limits<double>::quiet_NaN()}); });
  expect_error(ErrorCode::NonFiniteValue,
               [] { Tensor<float>::create({1, 1, 1, 1}, {std::numeric_limits<float>::infinity()}); });
}

TEST(Conv2d, IdentityKernelIsExactIdentity) {
  Rng rng(1);
  const auto x = random_tensor<double>({2, 1, 5, 7}, rng);
  const auto y = conv2d(x, make_conv(1, 1, 1, {1.0}, {0.0}));
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, AveragingKernelKeepsConstant) {
  const auto x = Tensor<double>::filled({1, 1, 6, 5}, 5.0);
  const auto y = conv2d(x, make_conv(1, 1, 3, std::vector<double>(9, 1.0 / 9.0), {0.0}));
  for (const double v : y.data()) EXPECT_NEAR(v, 5.0, 1e-14);
}

TEST(Conv2d, OnesKernelMatchesPatchSumOracle) {
  const auto x = Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto p = make_conv(1, 1, 3, std::vector<double>(9, 1.0), {0.0});
  const auto y = conv2d(x, p);
  const auto oracle = conv_oracle(x, p.weight, p.bias, PaddingMode::replicate);
  // Replicate-padded 4x4 grid [[1,1,2,2],[1,1,2,2],[3,3,4,4],[3,3,4,4]] summed over 3x3 windows.
  const std::vector<double> frozen{18, 21, 24, 27};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(oracle[i], frozen[i]);
    EXPECT_EQ(y[i], frozen[i]);
  }
}

TEST(Conv2d, RandomMultiChannelMatchesOracle) {
  Rng rng(3);
  for (const PaddingMode mode : {PaddingMode::replicate, PaddingMode::zero}) {
    const auto x = random_tensor<double>({2, 3, 6, 5}, rng);
    const auto w = random_tensor<double>({4, 3, 5, 5}, rng);
    const auto b = random_tensor<double>({1, 4, 1, 1}, rng);
    const auto y = conv2d(x, ConvParams<double>::make(w, b, mode));
    const auto oracle = conv_oracle(x, w, b, mode);
    ASSERT_EQ(y.size(), oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-12);
  }
}

TEST(Conv2d, ChannelMismatch) {
  const auto x = Tensor<double>::zeros({1, 2, 4, 4});
  expect_error(ErrorCode::ChannelMismatch, [&] { conv2d(x, make_conv(3, 1, 1, {1, 1, 1}, {0})); });
}

TEST(Conv2d, EvenKernelRejected) {
  expect_error(ErrorCode::InvalidConfig, [] { make_conv(1, 1, 2, {1, 1, 1, 1}, {0}); });
}

TEST(Conv2d, IsLinearWithoutBias) {
  Rng rng(4);
  const auto x = random_tensor<double>({1, 3, 7, 7}, rng);
  const auto y = random_tensor<double>({1, 3, 7, 7}, rng);
  const auto w = random_tensor<double>({2, 3, 3, 3}, rng);
  const auto p = ConvParams<double>::make(w, Tensor<double>::zeros({1, 2, 1, 1}));
  const double alpha = 0.7, beta = -1.3;
  const auto lhs = conv2d(add(scale(x, alpha), scale(y, beta)), p);
  const auto rhs = add(scale(conv2d(x, p), alpha), scale(conv2d(y, p), beta));
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(Shift2d, NullShiftIsIdentity) {
  Rng rng(5);
  const auto x = random_tensor<double>({1, 2, 4, 5}, rng);
  const auto y = shift2d(x, 0, 0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Shift2d, ConstantStaysConstantUnderReplicate) {
  const auto x = Tensor<double>::filled({1, 1, 5, 5}, 2.5);
  for (int d = -4; d <= 4; ++d) {
    const auto y = shift2d(x, d, -d);
    for (const double v : y.data()) EXPECT_EQ(v, 2.5);
  }
}

TEST(Shift2d, IndexArithmeticOracle) {
  const auto x = Tensor<double>::create({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto y = shift2d(x, 1, 0, PaddingMode::replicate);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{2, 2, 4, 4}));
  const auto z = shift2d(x, 0, 1, PaddingMode::zero);
  EXPECT_EQ(std::vector<double>(z.data().begin(), z.data().end()), (std::vector<double>{3, 4, 0, 0}));
}

TEST(Shift2d, TooLarge) {
  const auto x = Tensor<double>::zeros({1, 1, 3, 8});
  expect_error(ErrorCode::ShiftTooLarge, [&] { shift2d(x, 3, 0); });
  expect_error(ErrorCode::ShiftTooLarge, [&] { shift2d(x, 0, -3); });
}

TEST(Shift2d, ShiftBackRestoresInterior) {
  Rng rng(6);
  const auto x = random_tensor<double>({1, 2, 9, 9}, rng);
  for (int dx = -3; dx <= 3; ++dx)
    for (int dy = -3; dy <= 3; ++dy) {
      const auto back = shift2d(shift2d(x, dx, dy), -dx, -dy);
      const std::size_t m = 3;
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = m; i < 9 - m; ++i)
          for (std::size_t j = m; j < 9 - m; ++j) EXPECT_EQ(back(0, c, i, j), x(0, c, i, j));
    }
}

TEST(Elementwise, SelfDifferenceIsZero) {
  Rng rng(7);
  const auto x = random_tensor<double>({1, 3, 4, 4}, rng);
  const auto d = sub(x, x);
  for (const double v : d.data()) EXPECT_EQ(v, 0.0);
}

TEST(Elementwise, ConcatAddsChannels) {
  const auto a = Tensor<double>::zeros({1, 3, 4, 4});
  const auto b = Tensor<double>::filled({1, 16, 4, 4}, 1.0);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 19, 4, 4}));
  EXPECT_EQ(c(0, 2, 3, 3), 0.0);
  EXPECT_EQ(c(0, 3, 0, 0), 1.0);
}

TEST(Elementwise, ConcatShapeMismatch) {
  expect_error(ErrorCode::ShapeMismatch,
               [] { concat_channels(Tensor<double>::zeros({1, 1, 4, 4}), Tensor<double>::zeros({1, 1, 4, 5})); });
  expect_error(ErrorCode::ShapeMismatch,
               [] { add(Tensor<double>::zeros({1, 1, 4, 4}), Tensor<double>::zeros({1, 2, 4, 4})); });
}

TEST(Elementwise, Relu) {
  const auto y = relu(Tensor<double>::create({1, 1, 1, 3}, {-1, 0, 2}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 0, 2}));
}

TEST(Elementwise, SaturatingActivationsStayFinite) {
  const auto x = Tensor<double>::create({1, 1, 1, 4}, {-800, -40, 40, 800});
  for (const Activation a : {Activation::sigmoid, Activation::tanh, Activation::relu}) {
    const auto y = activate(x, a);
    for (const double v : y.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Backward, LinearMapGradientIsInput) {
  Rng rng(8);
  const auto x = random_tensor<double>({1, 2, 3, 3}, rng);
  const auto w = random_tensor<double>({1, 2, 3, 3}, rng).as_parameter();
  const auto g = backward(sum(mul(w, x))).of(w);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(g[i], x[i]);
}

TEST(Backward, UnreachableParameterGetsZero) {
  const auto p = Tensor<double>::parameter({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto q = Tensor<double>::parameter({1, 1, 2, 2}, {1, 1, 1, 1});
  const auto grads = backward(sum(q));
  EXPECT_FALSE(grads.contains(p));
  for (const double v : grads.of(p)) EXPECT_EQ(v, 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  const auto p = Tensor<double>::parameter({1, 1, 2, 2}, {1, 2, 3, 4});
  expect_error(ErrorCode::NonScalarLoss, [&] { backward(scale(p, 2.0)); });
}

TEST(Backward, SharedInputAccumulates) {
  const auto x = Tensor<double>::parameter({1, 1, 1, 2}, {3, -2});
  // d/dx sum(x*x + x) = 2x + 1
  const auto g = backward(sum(add(mul(x, x), x))).of(x);
  EXPECT_EQ(g[0], 7.0);
  EXPECT_EQ(g[1], -3.0);
}

TEST(Backward, L1OfConvMatchesFiniteDifferences) {
  Rng rng(9);
  const auto x = random_tensor<double>({1, 2, 6, 6}, rng);
  const auto t = random_tensor<double>({1, 3, 6, 6}, rng);
  const auto p = init_conv<double>(2, 3, 3, rng);
  const ScalarFn f = [&](std::span<const Tensor<double>> q) {
    return l1_loss(conv2d(x, ConvParams<double>::make(q[0], q[1])), t);
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  const auto report = grad_check(f, {p.weight, p.bias}, opt);
  EXPECT_TRUE(report.pass) << selfcheck::describe(report);
}

TEST(GradCheck, QuadraticOnPointwiseConv) {
  Rng rng(10);
  const auto x = random_tensor<double>({1, 2, 4, 4}, rng);
  const auto p = init_conv<double>(2, 1, 1, rng);
  const ScalarFn f = [&](std::span<const Tensor<double>> q) {
    const auto y = conv2d(x, ConvParams<double>::make(q[0], q[1]));
    return sum(mul(y, y));
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto report = grad_check(f, {p.weight, p.bias}, opt);
  EXPECT_TRUE(report.pass) << selfcheck::describe(report);
}

TEST(GradCheck, CorruptedGradientFails) {
  Rng rng(11);
  const auto x = random_tensor<double>({1, 2, 4, 4}, rng);
  const auto p = init_conv<double>(2, 1, 1, rng);
  const ScalarFn f = [&](std::span<const Tensor<double>> q) {
    const auto y = conv2d(x, ConvParams<double>::make(q[0], q[1]));
    return sum(mul(y, y));
  };
  std::vector<Tensor<double>> leaves{p.weight, p.bias};
  const auto grads = backward(f(leaves));
  std::vector<std::vector<double>> analytic{grads.of(leaves[0]), grads.of(leaves[1])};
  EXPECT_TRUE(compare_gradients(f, leaves, analytic).pass);
  analytic[0][0] += 0.1;
  EXPECT_FALSE(compare_gradients(f, leaves, analytic).pass);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-10, 0.0), 1e-2);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

TEST(GradCheck, EveryLayerOpPassesAtLayerTolerance) {
  for (const auto& r : selfcheck::gradient_suite()) {
    if (r.name.rfind("end-to-end", 0) == 0) continue;
    EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
  }
}

TEST(NanGuard, OpsFromFiniteInputsStayFinite) {
  // Ops validate their outputs when DWA_CHECK_FINITE is set (as in this test).
  const auto big = Tensor<float>::filled({1, 1, 4, 4}, 3e38f);
  EXPECT_THROW(add(big, big), Error);
  Rng rng(12);
  const auto x = random_tensor<double>({1, 3, 6, 6}, rng, -50, 50);
  for (const Activation a : {Activation::sigmoid, Activation::tanh}) {
    const auto y = activate(x, a);
    for (const double v : y.data()) ASSERT_TRUE(std::isfinite(v));
  }
}

}  // namespace
}  // namespace dwa
