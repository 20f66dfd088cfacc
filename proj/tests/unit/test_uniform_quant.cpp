// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcp/uniform_quant.hpp"
#include "test_support.hpp"

namespace {

using rcp::ErrorKind;
using rcp::ZeroPoint;
using testing_support::kind_of;

std::vector<double> random_group(rcp::SeededRng& rng, std::size_t n) {
  std::vector<double> g(n);
  const double scale = std::exp(rng.uniform(-4, 4));
  const double shift = rng.uniform(-2, 2) * scale;
  for (double& v : g) v = rng.normal() * scale + shift;
  return g;
}

TEST(QuantAsym, GridAlignedRoundTrip) {
  const std::vector<double> g{0, 1, 2, 3};
  const auto r = rcp::quant_asym(g, 2);
  EXPECT_EQ(r.range, 3.0);
  EXPECT_EQ(r.step, 1.0);
  EXPECT_EQ(r.zero_point, 0);
  EXPECT_EQ(r.codes, (std::vector<std::int32_t>{0, 1, 2, 3}));
  EXPECT_EQ(r.dequantized(), g);
}

TEST(QuantAsym, RangeNormalizedZeroPointWithTiesToEven) {
  const std::vector<double> g{-2, -1, 0, 4};
  const auto r = rcp::quant_asym(g, 2, std::nullopt, std::nullopt, ZeroPoint::kRangeNormalized);
  EXPECT_EQ(r.range, 6.0);
  EXPECT_EQ(r.step, 2.0);
  EXPECT_EQ(r.zero_point, 0);
  EXPECT_EQ(r.codes, (std::vector<std::int32_t>{0, 0, 0, 2}));
  EXPECT_EQ(r.dequantized(), (std::vector<double>{0, 0, 0, 4}));
}

TEST(QuantAsym, StepNormalizedZeroPointCoversTheRange) {
  const std::vector<double> g{-2, -1, 0, 4};
  const auto r = rcp::quant_asym(g, 2);
  EXPECT_EQ(r.zero_point, 1);
  // -1 / 2 = -0.5 ties to 0.
  EXPECT_EQ(r.codes, (std::vector<std::int32_t>{0, 1, 1, 3}));
  EXPECT_EQ(r.dequantized(), (std::vector<double>{-2, 0, 0, 4}));
}

TEST(QuantAsym, ClipBoundsApply) {
  const std::vector<double> g{-10, -1, 0, 1, 10};
  const auto r = rcp::quant_asym(g, 2, -1.5, 1.5);
  EXPECT_EQ(r.min, -1.5);
  EXPECT_EQ(r.max, 1.5);
  EXPECT_EQ(r.codes.front(), 0);
  EXPECT_EQ(r.codes.back(), 3);
}

TEST(QuantAsym, ErrorBoundAgainstBruteForce) {
  rcp::SeededRng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int bits = std::array{2, 3, 4, 8}[trial % 4];
    const auto g = random_group(rng, 16 + rng.below(64));
    for (ZeroPoint rule : {ZeroPoint::kStepNormalized, ZeroPoint::kRangeNormalized}) {
      const auto r = rcp::quant_asym(g, bits, std::nullopt, std::nullopt, rule);
      const double z_exact = -r.min / (rule == ZeroPoint::kStepNormalized ? r.step : r.range);
      const double bound = r.step / 2 + std::abs(z_exact - r.zero_point) * r.step;
      const auto dq = r.dequantized();
      for (std::size_t i = 0; i < g.size(); ++i) {
        ASSERT_GE(r.codes[i], 0);
        ASSERT_LE(r.codes[i], r.max_code());
        double nearest = INFINITY;
        for (int c = 0; c <= r.max_code(); ++c) nearest = std::min(nearest, std::abs(g[i] - r.dequant(c)));
        const double err = std::abs(g[i] - dq[i]);
        ASSERT_NEAR(err, nearest, 1e-9 * r.range) << "trial " << trial;
        if (rule == ZeroPoint::kStepNormalized) ASSERT_LE(err, bound * (1 + 1e-9)) << "trial " << trial;
      }
    }
  }
}

TEST(QuantAsym, InRangeErrorIsHalfStep) {
  rcp::SeededRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_group(rng, 64);
    const auto r = rcp::quant_asym(g, 3);
    const double grid_lo = r.dequant(0), grid_hi = r.dequant(r.max_code());
    const auto dq = r.dequantized();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] >= grid_lo && g[i] <= grid_hi) ASSERT_LE(std::abs(g[i] - dq[i]), r.step / 2 * (1 + 1e-12));
    }
  }
}

TEST(QuantAsym, Idempotent) {
  rcp::SeededRng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int bits = std::array{2, 3, 4}[trial % 3];
    const auto g = random_group(rng, 32);
    const auto r = rcp::quant_asym(g, bits);
    const auto again = rcp::quant_asym(r.dequantized(), bits);
    ASSERT_EQ(again.codes, r.codes) << "trial " << trial;
  }
}

TEST(QuantAsym, Monotone) {
  rcp::SeededRng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = random_group(rng, 100);
    const auto r = rcp::quant_asym(g, 2);
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return g[a] < g[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) ASSERT_LE(r.codes[order[i - 1]], r.codes[order[i]]);
  }
}

TEST(QuantAsym, Errors) {
  const std::vector<double> flat(8, 1.0);
  EXPECT_EQ(kind_of([&] { rcp::quant_asym(flat, 2); }), ErrorKind::kDegenerate);
  const std::vector<double> g{-1, 0, 1, 2};
  EXPECT_EQ(kind_of([&] { rcp::quant_asym(g, 2, 5.0, 6.0); }), ErrorKind::kDegenerate);
  EXPECT_EQ(kind_of([&] { rcp::quant_asym(g, 5); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { rcp::quant_asym(std::vector<double>{}, 2); }), ErrorKind::kDegenerate);
}

TEST(ActQuant, Examples) {
  rcp::ActQuantConfig full;
  full.clip_ratio = 1.0;
  const auto a = rcp::quant_act_per_token(rcp::Matrix(1, 2, std::vector<float>{-7, 7}), full);
  EXPECT_EQ(a.scale[0], 1.0f);
  EXPECT_EQ(a.code(0, 0), -7);
  EXPECT_EQ(a.code(0, 1), 7);

  const auto b = rcp::quant_act_per_token(rcp::Matrix(1, 2, std::vector<float>{0, 10}));
  EXPECT_NEAR(b.scale[0], 9.0 / 7.0, 1e-6);
  EXPECT_EQ(b.code(0, 0), 0);
  EXPECT_EQ(b.code(0, 1), 7);
}

TEST(ActQuant, CodesStayInRangeAndScaleFollowsMaxAbs) {
  rcp::SeededRng rng(5);
  rcp::Matrix x(16, 64);
  for (float& v : x.data()) v = static_cast<float>(rng.normal() * 3);
  const auto q = rcp::quant_act_per_token(x);
  for (std::size_t t = 0; t < 16; ++t) {
    double maxabs = 0;
    for (float v : x.row(t)) maxabs = std::max(maxabs, std::abs(static_cast<double>(v)));
    EXPECT_NEAR(q.scale[t], 0.9 * maxabs / 7, 1e-6 * maxabs);
    for (std::size_t c = 0; c < 64; ++c) {
      ASSERT_GE(q.code(t, c), -8);
      ASSERT_LE(q.code(t, c), 7);
      const double expect = std::clamp(std::nearbyint(x(t, c) / static_cast<double>(q.scale[t])), -8.0, 7.0);
      ASSERT_NEAR(q.code(t, c), expect, 1.0);
    }
  }
}

TEST(ActQuant, ZeroTokens) {
  const rcp::Matrix x(2, 4, std::vector<float>{1, 2, 3, 4, 0, 0, 0, 0});
  EXPECT_EQ(kind_of([&] { rcp::quant_act_per_token(x); }), ErrorKind::kZeroToken);
  rcp::ActQuantConfig cfg;
  cfg.zero_token_fallback = true;
  const auto q = rcp::quant_act_per_token(x, cfg);
  EXPECT_EQ(q.scale[1], 1.0f);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(q.code(1, c), 0);
  cfg.clip_ratio = 0.0;
  EXPECT_EQ(kind_of([&] { rcp::quant_act_per_token(x, cfg); }), ErrorKind::kConfig);
}

TEST(KvQuant, UnitClipMatchesQuantAsym) {
  rcp::SeededRng rng(6);
  rcp::Matrix x(3, 256);
  for (float& v : x.data()) v = static_cast<float>(rng.uniform01());
  rcp::KvQuantConfig cfg;
  cfg.clip_ratio = 1.0;
  const auto groups = rcp::quant_kv_group(x, cfg);
  ASSERT_EQ(groups.size(), 6u);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t g = 0; g < 2; ++g) {
      std::vector<double> grp(x.row(t).begin() + g * 128, x.row(t).begin() + (g + 1) * 128);
      const auto ref = rcp::quant_asym(grp, 4);
      EXPECT_EQ(groups[t * 2 + g].codes, ref.codes);
      EXPECT_EQ(groups[t * 2 + g].step, ref.step);
    }
  }
}

TEST(KvQuant, ClipShrinksRangeAboutMidpoint) {
  std::vector<float> row(128);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(i) / 127.0f;
  const auto groups = rcp::quant_kv_group(rcp::Matrix(1, 128, row));
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_NEAR(groups[0].range, 0.95, 1e-12);
  EXPECT_NEAR(groups[0].min, 0.025, 1e-12);
  EXPECT_NEAR(groups[0].max, 0.975, 1e-12);
  for (auto c : groups[0].codes) {
    EXPECT_GE(c, 0);
    EXPECT_LE(c, 15);
  }
}

TEST(KvQuant, Errors) {
  EXPECT_EQ(kind_of([] { rcp::quant_kv_group(rcp::Matrix(1, 100)); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { rcp::quant_kv_group(rcp::Matrix(1, 128)); }), ErrorKind::kDegenerate);
}

}  // namespace
