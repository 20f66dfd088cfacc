// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rcp/error.hpp"

namespace rcp {

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_grad(double x) noexcept { return sigmoid(x) * sigmoid(-x); }

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::kConfig, "logit argument must lie in (0, 1)");
  return std::log(p / (1.0 - p));
}

LdpParams LdpParams::uniform(double beta, double gamma) {
  return LdpParams{beta, gamma, -std::log(2.0), 0.0};
}

double LdpGrids::normalize(double x) const noexcept { return std::clamp((x - lo) / h, 0.0, 1.0); }

std::uint8_t LdpGrids::code(double x) const noexcept {
  const double v = normalize(x);
  return static_cast<std::uint8_t>((v >= t[0]) + (v >= t[1]) + (v >= t[2]));
}

double LdpGrids::dequant(std::uint8_t c) const noexcept {
  if (c == 0) return lo;
  if (c == 3) return hi;
  return lo + h * w[c];
}

double LdpGrids::threshold_distance(double x) const noexcept {
  const double v = normalize(x);
  return std::min({std::abs(v - t[0]), std::abs(v - t[1]), std::abs(v - t[2])});
}

LdpGrids derive_grids(double group_min, double group_max, const LdpParams& params) {
  LdpGrids g;
  g.lo = sigmoid(params.beta) * group_min;
  g.hi = sigmoid(params.gamma) * group_max;
  g.h = g.hi - g.lo;
  if (!(g.h > 0.0) || !std::isfinite(g.h)) {
    fail(ErrorKind::kInvalidRange, "clip range is empty (lo=" + std::to_string(g.lo) +
                                       ", hi=" + std::to_string(g.hi) + ")");
  }

  // 1 - sigma(x) is evaluated as sigma(-x) so tiny partitions keep precision.
  const double rest = sigmoid(-params.s1);
  g.p[0] = sigmoid(params.s1);
  g.p[1] = rest * sigmoid(params.s2);
  g.p[2] = rest * sigmoid(-params.s2);

  // Closed forms of the partition midpoints; the last one is taken from the
  // top so a tiny p[2] still leaves t[2] strictly below 1.
  g.t[0] = g.p[0] / 2;
  g.t[1] = g.p[0] + g.p[1] / 2;
  g.t[2] = 1.0 - g.p[2] / 2;

  g.w[0] = 0.0;
  g.w[1] = (g.t[0] + g.t[1]) / 2;
  g.w[2] = (g.t[1] + g.t[2]) / 2;
  g.w[3] = 1.0;
  return g;
}

LdpGrids derive_grids(std::span<const double> group, const LdpParams& params) {
  if (group.empty()) fail(ErrorKind::kDegenerate, "empty group");
  const auto [mn, mx] = std::minmax_element(group.begin(), group.end());
  return derive_grids(*mn, *mx, params);
}

LdpFakeQuant fake_quant(std::span<const double> group, const LdpParams& params) {
  LdpFakeQuant out;
  out.grids = derive_grids(group, params);
  out.codes.resize(group.size());
  out.w_hat.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    out.codes[i] = out.grids.code(group[i]);
    out.w_hat[i] = out.grids.dequant(out.codes[i]);
  }
  return out;
}

LdpGradients grads(std::span<const double> group, const LdpParams& params, std::span<const double> upstream) {
  if (upstream.size() != group.size()) fail(ErrorKind::kShape, "upstream gradient length differs from group");
  const auto [mn_it, mx_it] = std::minmax_element(group.begin(), group.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  const LdpGrids g = derive_grids(mn, mx, params);

  // w1 = 3/4 p1 + 1/4 p2 and w2 = 1/4 + 3/4 p1 + 1/2 p2, with
  // p1 = sigma(s1), p2 = (1 - p1) sigma(s2).
  const double ds1_p1 = sigmoid_grad(params.s1);
  const double ds1_p2 = -ds1_p1 * sigmoid(params.s2);
  const double ds2_p2 = sigmoid(-params.s1) * sigmoid_grad(params.s2);
  const std::array<double, 4> dw_ds1{0.0, 0.75 * ds1_p1 + 0.25 * ds1_p2, 0.75 * ds1_p1 + 0.5 * ds1_p2, 0.0};
  const std::array<double, 4> dw_ds2{0.0, 0.25 * ds2_p2, 0.5 * ds2_p2, 0.0};

  const double dlo_dbeta = sigmoid_grad(params.beta) * mn;
  const double dhi_dgamma = sigmoid_grad(params.gamma) * mx;

  LdpGradients out;
  out.d_group.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double up = upstream[i];
    const double x = group[i];
    out.d_group[i] = (x >= g.lo && x <= g.hi) ? up : 0.0;
    if (up == 0.0) continue;
    const std::uint8_t c = g.code(x);
    // w_hat = lo (1 - w_c) + hi w_c
    out.d_beta += up * dlo_dbeta * (1.0 - g.w[c]);
    out.d_gamma += up * dhi_dgamma * g.w[c];
    out.d_s1 += up * g.h * dw_ds1[c];
    out.d_s2 += up * g.h * dw_ds2[c];
  }
  return out;
}

}  // namespace rcp
