#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "svit/kernels.hpp"
#include "svit/mac_counter.hpp"
#include "svit/rng.hpp"
#include "test_support.hpp"

namespace svit {
namespace {

using testing::random_tensor;

TEST(Matmul, IdentityLeavesMatrix) {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> b({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, b), b);
}

TEST(Matmul, HandComputed) {
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  Tensor<double> b({2, 1}, {0, 1});
  EXPECT_EQ(matmul(a, b), Tensor<double>({2, 1}, {2, 4}));
}

TEST(Matmul, MatchesTripleLoopBitForBit) {
  for (std::size_t k : {1u, 3u, 4u, 5u, 9u}) {
    auto a = random_tensor({7, k}, 11 + k);
    auto b = random_tensor({k, 3}, 17 + k);
    EXPECT_EQ(matmul(a, b), testing::naive_matmul(a, b)) << "k=" << k;
  }
}

TEST(Matmul, CountsMacs) {
  MacCounter counter;
  matmul(random_tensor({7, 5}, 1), random_tensor({5, 3}, 2), &counter);
  EXPECT_EQ(counter.macs(), 105u);
}

TEST(Matmul, RejectsInnerMismatch) {
  EXPECT_THROW(matmul(Tensor<double>({2, 3}), Tensor<double>({2, 3})), DimensionError);
}

TEST(Softmax, UniformLogits) {
  auto p = softmax_rows(Tensor<double>({1, 3}, {0, 0, 0}));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Softmax, SingleColumnIsOne) {
  auto p = softmax_rows(Tensor<double>({2, 1}, {5, -2}));
  EXPECT_EQ(p, Tensor<double>({2, 1}, {1, 1}));
}

TEST(Softmax, MatchesDirectFormula) {
  auto p = softmax_rows(Tensor<double>({1, 3}, {1, 2, 3}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p[j], std::exp(j + 1.0) / z, 1e-12);
}

TEST(Softmax, LargeLogitsStayFinite) {
  auto p = softmax_rows(Tensor<float>({1, 2}, {1000.f, 1000.f}));
  EXPECT_FLOAT_EQ(p[0], 0.5f);
}

TEST(LayerNorm, ConstantTokenMapsToBeta) {
  auto y = layer_norm(Tensor<double>::filled({1, 4}, 3.5), Tensor<double>::filled({4}, 1.0),
                      Tensor<double>({4}));
  EXPECT_EQ(y, Tensor<double>({1, 4}));
}

TEST(LayerNorm, NormalisedTokenUnchanged) {
  auto y = layer_norm(Tensor<double>({1, 2}, {1, -1}), Tensor<double>::filled({2}, 1.0),
                      Tensor<double>({2}), 1e-300);
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], -1.0);
}

TEST(LayerNorm, OutputStatistics) {
  auto x = random_tensor({3, 16}, 5, -4, 9);
  auto y = layer_norm(x, Tensor<double>::filled({16}, 1.0), Tensor<double>({16}));
  for (std::size_t t = 0; t < 3; ++t) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < 16; ++j) mean += y.at(t, j) / 16;
    for (std::size_t j = 0; j < 16; ++j) var += (y.at(t, j) - mean) * (y.at(t, j) - mean) / 16;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);  // eps shifts it slightly
  }
}

TEST(LayerNorm, RejectsWrongAffineSize) {
  EXPECT_THROW(layer_norm(Tensor<double>({2, 3}), Tensor<double>({2}), Tensor<double>({3})),
               DimensionError);
}

TEST(Gelu, KnownValues) {
  EXPECT_EQ(gelu_scalar(0.0), 0.0);
  EXPECT_NEAR(gelu_scalar(1.0), 0.8411919906082768, 1e-15);
  EXPECT_NEAR(gelu_scalar(-2.0), -0.04540230591222494, 1e-15);
  for (double x = 6; x < 20; x += 1.5) EXPECT_NEAR(gelu_scalar(x), x, 1e-3);
}

TEST(Gelu, CloseToExactErfForm) {
  for (int i = 0; i <= 100; ++i) {
    const double x = -5.0 + 0.1 * i;
    const double exact = 0.5 * x * (1 + std::erf(x / std::numbers::sqrt2));
    EXPECT_NEAR(gelu_scalar(x), exact, 1e-3) << x;
  }
}

Tensor<double> loop_conv(const Tensor<double>& x, const Tensor<double>& k, std::size_t stride,
                         std::size_t pad) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor<double> out({cout, oh, ow});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                continue;
              out.at(co, oy, ox) += x.at(ci, iy, ix) * k[((co * cin + ci) * kh + ky) * kw + kx];
            }
  return out;
}

TEST(Conv2d, IdentityKernel) {
  auto x = random_tensor({1, 4, 5}, 3);
  EXPECT_EQ(conv2d(x, Tensor<double>({1, 1, 1, 1}, {1}), 1, 0), x);
}

TEST(Conv2d, BoxSumInterior) {
  auto y = conv2d(Tensor<double>::filled({1, 5, 5}, 1.0), Tensor<double>::filled({1, 1, 3, 3}, 1.0),
                  1, 1);
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 1; j < 4; ++j) EXPECT_EQ(y.at(0, i, j), 9.0);
  EXPECT_EQ(y.at(0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 2), 6.0);
}

TEST(Conv2d, MatchesLoopOracle) {
  struct Case {
    std::size_t cin, cout, h, w, k, stride, pad;
  };
  for (const Case& c : {Case{3, 4, 6, 5, 3, 1, 1}, Case{2, 3, 8, 8, 2, 2, 0},
                        Case{4, 2, 7, 7, 3, 2, 1}, Case{1, 1, 5, 9, 1, 1, 0}}) {
    auto x = random_tensor({c.cin, c.h, c.w}, c.h * 7 + c.k);
    auto k = random_tensor({c.cout, c.cin, c.k, c.k}, c.w * 3 + c.stride);
    auto got = conv2d(x, k, c.stride, c.pad);
    auto want = loop_conv(x, k, c.stride, c.pad);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_abs_diff(got, want), 1e-14);
  }
}

TEST(Conv2d, CountsPaddedTaps) {
  MacCounter counter;
  conv2d(random_tensor({2, 4, 4}, 1), random_tensor({3, 2, 3, 3}, 2), 1, 1, &counter);
  EXPECT_EQ(counter.macs(), 3u * 16 * 2 * 9);
}

TEST(Conv2d, NonIntegralOutputThrows) {
  EXPECT_THROW(conv2d(Tensor<double>({1, 8, 8}), Tensor<double>({1, 1, 3, 3}), 2, 0),
               DimensionError);
}

TEST(ConvTranspose, ImpulseImprintsKernel) {
  Tensor<double> x({1, 1, 1}, {1});
  auto k = random_tensor({1, 1, 4, 4}, 8);
  auto y = conv2d_transpose(x, k, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
  // Pad 1 crops the outer ring of the 4×4 footprint.
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(y.at(0, i, j), k[(i + 1) * 4 + j + 1]);
}

TEST(ConvTranspose, DoublesSpatialSize) {
  auto y = conv2d_transpose(Tensor<double>({3, 8, 8}), Tensor<double>({3, 5, 4, 4}), 2);
  EXPECT_EQ(y.shape(), (Shape{5, 16, 16}));
  auto z = conv2d_transpose(Tensor<double>({3, 7, 7}), Tensor<double>({3, 2, 8, 8}), 4);
  EXPECT_EQ(z.shape(), (Shape{2, 28, 28}));
}

TEST(ConvTranspose, IsAdjointOfStridedConv) {
  for (std::size_t s : {2u, 4u}) {
    auto x = random_tensor({3, 5, 6}, 21 + s);
    auto k = random_tensor({3, 2, 2 * s, 2 * s}, 31 + s);
    auto y = random_tensor({2, 5 * s, 6 * s}, 41 + s);
    auto up = conv2d_transpose(x, k, s);
    auto down = conv2d(y, k, s, s / 2);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < up.size(); ++i) lhs += up[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * down[i];
    EXPECT_NEAR(lhs, rhs, 1e-10) << "stride " << s;
  }
}

TEST(ConvTranspose, RejectsOtherStrides) {
  EXPECT_THROW(conv2d_transpose(Tensor<double>({1, 2, 2}), Tensor<double>({1, 1, 6, 6}), 3),
               ConfigError);
}

TEST(Layout, HwcRoundTrip) {
  auto x = random_tensor({3, 4, 5}, 9);
  EXPECT_EQ(hwc_to_chw(chw_to_hwc(x)), x);
  EXPECT_EQ(chw_to_hwc(x).at(2, 1, 0), x.at(0, 2, 1));
}

TEST(Layout, GatherScatterColumns) {
  auto x = random_tensor({4, 6}, 2);
  const std::vector<std::size_t> rows{3, 1};
  auto g = gather_rows(x, rows);
  EXPECT_EQ(g.at(0, 5), x.at(3, 5));
  Tensor<double> back({4, 6});
  scatter_rows(back, g, rows);
  EXPECT_EQ(back.at(1, 2), x.at(1, 2));
  EXPECT_EQ(back.at(0, 0), 0.0);
  auto cols = slice_cols(x, 2, 3);
  EXPECT_EQ(cols.shape(), (Shape{4, 3}));
  Tensor<double> y({4, 6});
  write_cols(y, cols, 2);
  EXPECT_EQ(y.at(3, 4), x.at(3, 4));
}

TEST(Rng, FrozenStream) {
  Rng rng(42);
  EXPECT_EQ(rng.next_u64(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(rng.next_u64(), 0x6104d9866d113a7eULL);
  EXPECT_EQ(rng.next_u64(), 0xae17533239e499a1ULL);
  Rng zero(0);
  EXPECT_EQ(zero.next_u64(), 0x99ec5f36cb75f2b4ULL);
}

TEST(Rng, UnitIntervalAndBelow) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(13), 13u);
  }
}

TEST(MacCounter, ScopesAttributeCategoriesAndFrames) {
  MacCounter counter;
  {
    CostScope scope(&counter, CostCategory::kMlp);
    FrameScope frame(&counter, 2);
    counter.add(10);
  }
  counter.add(5);
  EXPECT_EQ(counter.macs(), 15u);
  EXPECT_EQ(counter.macs(CostCategory::kMlp), 10u);
  EXPECT_EQ(counter.macs(CostCategory::kOther), 5u);
  ASSERT_GE(counter.by_frame().size(), 3u);
  EXPECT_EQ(counter.by_frame()[2], 10u);
  CostScope null_scope(nullptr, CostCategory::kMlp);  // no-op
}

}  // namespace
}  // namespace svit
