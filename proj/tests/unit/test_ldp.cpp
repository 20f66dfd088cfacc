// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcp/ldp.hpp"
#include "rcp/uniform_quant.hpp"
#include "test_support.hpp"

namespace {

using rcp::ErrorKind;
using rcp::LdpParams;
using testing_support::kind_of;

// From the definition 1 / (1 + e^-x), evaluated in long double.
double sigmoid_oracle(double x) { return static_cast<double>(1.0L / (1.0L + std::exp(-static_cast<long double>(x)))); }

LdpParams random_params(rcp::SeededRng& rng, double range = 4.0) {
  return LdpParams{rng.uniform(0.5, range), rng.uniform(0.5, range), rng.uniform(-range, range),
                   rng.uniform(-range, range)};
}

double weighted_sum(const std::vector<double>& group, const LdpParams& p, const std::vector<double>& up) {
  const auto fq = rcp::fake_quant(group, p);
  double s = 0;
  for (std::size_t i = 0; i < group.size(); ++i) s += up[i] * fq.w_hat[i];
  return s;
}

TEST(Sigmoid, MatchesDefinition) {
  for (double x : {-30.0, -20.0, -3.0, -1e-9, 0.0, 0.5, 7.0, 20.0, 30.0}) {
    EXPECT_NEAR(rcp::sigmoid(x), sigmoid_oracle(x), 1e-15);
    EXPECT_NEAR(rcp::sigmoid_grad(x), sigmoid_oracle(x) * (1 - sigmoid_oracle(x)), 1e-15);
  }
  EXPECT_NEAR(rcp::logit(rcp::sigmoid(1.25)), 1.25, 1e-12);
  EXPECT_EQ(kind_of([] { rcp::logit(1.0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { rcp::logit(0.0); }), ErrorKind::kConfig);
}

TEST(DeriveGrids, UniformInit) {
  const auto p = LdpParams::uniform();
  EXPECT_NEAR(p.s1, -0.693147, 1e-6);
  EXPECT_EQ(p.s2, 0.0);
  const auto g = rcp::derive_grids(-1.0, 1.0, p);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g.p[i], 1.0 / 3, 1e-15);
  EXPECT_NEAR(g.t[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(g.t[1], 1.0 / 2, 1e-15);
  EXPECT_NEAR(g.t[2], 5.0 / 6, 1e-15);
  EXPECT_EQ(g.w[0], 0.0);
  EXPECT_NEAR(g.w[1], 1.0 / 3, 1e-15);
  EXPECT_NEAR(g.w[2], 2.0 / 3, 1e-15);
  EXPECT_EQ(g.w[3], 1.0);
}

TEST(DeriveGrids, ZeroLogits) {
  const auto g = rcp::derive_grids(-1.0, 1.0, LdpParams{20, 20, 0, 0});
  EXPECT_EQ(g.p, (std::array<double, 3>{0.5, 0.25, 0.25}));
  EXPECT_EQ(g.t, (std::array<double, 3>{0.25, 0.625, 0.875}));
  EXPECT_EQ(g.w, (std::array<double, 4>{0, 0.4375, 0.75, 1}));
}

TEST(DeriveGrids, SaturatedClip) {
  const auto g = rcp::derive_grids(std::vector<double>{-1, 0.3, 1}, LdpParams::uniform(20, 20));
  EXPECT_NEAR(g.lo, -1.0, 1e-8);
  EXPECT_NEAR(g.hi, 1.0, 1e-8);
  EXPECT_NEAR(g.h, 2.0, 1e-8);
  EXPECT_EQ(g.lo + g.h, g.hi);
}

TEST(DeriveGrids, InvariantsOnRandomDraws) {
  rcp::SeededRng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const LdpParams p{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-15, 15), rng.uniform(-15, 15)};
    const auto g = rcp::derive_grids(-1.5, 2.0, p);
    ASSERT_NEAR(g.p[0] + g.p[1] + g.p[2], 1.0, 1e-12);
    ASSERT_GT(g.t[0], 0.0);
    ASSERT_LT(g.t[0], g.t[1]);
    ASSERT_LT(g.t[1], g.t[2]);
    ASSERT_LT(g.t[2], 1.0);
    ASSERT_LT(g.w[0], g.w[1]);
    ASSERT_LT(g.w[1], g.w[2]);
    ASSERT_LT(g.w[2], g.w[3]);
    ASSERT_NEAR(g.lo + g.h, g.hi, 1e-15);
  }
  for (double a : {-20.0, 20.0}) {
    for (double b : {-20.0, 20.0}) {
      const auto g = rcp::derive_grids(-1.0, 1.0, LdpParams{20, 20, a, b});
      EXPECT_NEAR(g.p[0] + g.p[1] + g.p[2], 1.0, 1e-12);
    }
  }
}

TEST(DeriveGrids, EmptyRangeRaises) {
  EXPECT_EQ(kind_of([] { rcp::derive_grids(1.0, 1.01, LdpParams{20, -20, 0, 0}); }), ErrorKind::kInvalidRange);
  EXPECT_EQ(kind_of([] { rcp::derive_grids(0.5, 0.5, LdpParams{}); }), ErrorKind::kInvalidRange);
  EXPECT_EQ(kind_of([] { rcp::derive_grids(std::vector<double>{}, LdpParams{}); }), ErrorKind::kDegenerate);
}

TEST(FakeQuant, Examples) {
  const std::vector<double> g{-1.0, 0.0, 1.0};
  const auto fq = rcp::fake_quant(g, LdpParams::uniform(30, 30));
  EXPECT_EQ(fq.codes, (std::vector<std::uint8_t>{0, 2, 3}));
  EXPECT_NEAR(fq.w_hat[1], 1.0 / 3, 1e-12);
  EXPECT_EQ(fq.w_hat[0], fq.grids.lo);
  EXPECT_EQ(fq.w_hat[2], fq.grids.hi);
}

TEST(FakeQuant, ThresholdTiesGoUp) {
  const auto g = rcp::derive_grids(0.0, 1.0, LdpParams{20, 20, 0, 0});
  // lo = 0 and h is the sigmoid of 20, so pick inputs that land exactly on t.
  for (std::uint8_t k = 0; k < 3; ++k) {
    const double x = g.lo + g.t[k] * g.h;
    if (g.normalize(x) == g.t[k]) {
      EXPECT_EQ(g.code(x), k + 1);
    }
  }
  EXPECT_EQ(g.code(-5.0), 0);
  EXPECT_EQ(g.code(5.0), 3);
}

TEST(FakeQuant, MonotoneAndEndpoints) {
  rcp::SeededRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> grp(64);
    for (double& v : grp) v = rng.normal();
    const auto p = random_params(rng);
    const auto fq = rcp::fake_quant(grp, p);
    std::vector<std::size_t> order(grp.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return grp[a] < grp[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      ASSERT_LE(fq.codes[order[i - 1]], fq.codes[order[i]]);
      ASSERT_LE(fq.w_hat[order[i - 1]], fq.w_hat[order[i]]);
    }
    for (std::size_t i = 0; i < grp.size(); ++i) {
      if (grp[i] <= fq.grids.lo) ASSERT_EQ(fq.w_hat[i], fq.grids.lo);
      if (grp[i] >= fq.grids.hi) ASSERT_EQ(fq.w_hat[i], fq.grids.hi);
      ASSERT_EQ(fq.w_hat[i], fq.grids.dequant(fq.codes[i]));
    }
  }
}

TEST(FakeQuant, UniformInitMatchesAsymmetricQuantizer) {
  // Grid-aligned inputs: min, max and the two interior levels.
  rcp::SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double lo = -rng.uniform(0.1, 3), hi = rng.uniform(0.1, 3);
    const double s = (hi - lo) / 3;
    std::vector<double> grp{lo, lo + s, lo + 2 * s, hi, lo + s, hi};
    const auto fq = rcp::fake_quant(grp, LdpParams::uniform(40, 40));
    const auto ref = rcp::quant_asym(grp, 2, std::nullopt, std::nullopt);
    for (std::size_t i = 0; i < grp.size(); ++i) {
      EXPECT_EQ(fq.codes[i], ref.codes[i]);
      EXPECT_NEAR(fq.w_hat[i], lo + ref.codes[i] * s, 1e-12);
    }
  }
}

TEST(Grads, ZeroUpstream) {
  const std::vector<double> grp{-1, -0.2, 0.4, 1};
  const auto gr = rcp::grads(grp, LdpParams{1, 2, 0.3, -0.4}, std::vector<double>(4, 0.0));
  EXPECT_EQ(gr.d_beta, 0.0);
  EXPECT_EQ(gr.d_gamma, 0.0);
  EXPECT_EQ(gr.d_s1, 0.0);
  EXPECT_EQ(gr.d_s2, 0.0);
  for (double v : gr.d_group) EXPECT_EQ(v, 0.0);
}

TEST(Grads, CodeZeroElement) {
  const std::vector<double> grp{-1.5, 0.2, 0.9, 2.0};
  const LdpParams p{0.7, 1.1, -0.2, 0.5};
  const double up = 1.75;
  const auto fq = rcp::fake_quant(grp, p);
  ASSERT_EQ(fq.codes[0], 0);
  const auto gr = rcp::grads(grp, p, std::vector<double>{up, 0, 0, 0});
  EXPECT_EQ(gr.d_gamma, 0.0);
  EXPECT_EQ(gr.d_s1, 0.0);
  EXPECT_EQ(gr.d_s2, 0.0);
  const double sb = sigmoid_oracle(p.beta);
  EXPECT_NEAR(gr.d_beta, up * sb * (1 - sb) * -1.5, 1e-14);
}

TEST(Grads, ClippedStraightThrough) {
  const std::vector<double> grp{-2, -0.5, 0.5, 2};
  const LdpParams p{0.0, 0.0, 0.1, 0.1};  // clip range [-1, 1]
  const std::vector<double> up{1, 2, 3, 4};
  const auto gr = rcp::grads(grp, p, up);
  EXPECT_EQ(gr.d_group, (std::vector<double>{0, 2, 3, 0}));
  EXPECT_EQ(kind_of([&] { rcp::grads(grp, p, std::vector<double>{1}); }), ErrorKind::kShape);
}

TEST(Grads, FiniteDifferences) {
  rcp::SeededRng rng(4);
  const double step = 1e-4;
  int checked = 0;
  for (int trial = 0; checked < 100 && trial < 1000; ++trial) {
    std::vector<double> grp(1 + rng.below(8));
    for (double& v : grp) v = rng.normal();
    grp.push_back(-1.0 - rng.uniform01());
    grp.push_back(1.0 + rng.uniform01());
    const auto p = random_params(rng, 2.5);
    std::vector<double> up(grp.size());
    for (double& v : up) v = rng.normal();

    const auto grids = rcp::derive_grids(grp, p);
    bool near_threshold = false;
    for (double x : grp) near_threshold |= grids.threshold_distance(x) < 1e-3;
    if (near_threshold) continue;
    ++checked;

    const auto gr = rcp::grads(grp, p, up);
    const std::array<double, 4> analytic{gr.d_beta, gr.d_gamma, gr.d_s1, gr.d_s2};
    for (int k = 0; k < 4; ++k) {
      LdpParams plus = p, minus = p;
      double* fp[] = {&plus.beta, &plus.gamma, &plus.s1, &plus.s2};
      double* fm[] = {&minus.beta, &minus.gamma, &minus.s1, &minus.s2};
      *fp[k] += step;
      *fm[k] -= step;
      const double numeric = (weighted_sum(grp, plus, up) - weighted_sum(grp, minus, up)) / (2 * step);
      const double rel = std::abs(analytic[k] - numeric) /
                         std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
      EXPECT_LE(rel, 1e-4) << "trial " << trial << " param " << k;
    }
  }
  EXPECT_EQ(checked, 100);
}

}  // namespace
