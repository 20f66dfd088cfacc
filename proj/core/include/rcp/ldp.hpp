// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

// Learnable Direct Partitioning: a 2-bit non-uniform quantizer whose clip
// range comes from two sigmoid-gated logits (beta, gamma) on the group
// extrema and whose three interior partitions are set by two more logits
// (s1, s2). Thresholds sit at partition centres; dequantization levels sit
// halfway between thresholds, with the outer levels pinned to the clip range.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace rcp {

double sigmoid(double x) noexcept;
/// sigma'(x) = sigma(x) * (1 - sigma(x))
double sigmoid_grad(double x) noexcept;
double logit(double p);

/// Training keeps every logit inside [-20, 20].
inline constexpr double kLogitClamp = 20.0;

struct LdpParams {
  double beta = kLogitClamp;   // min-side clip logit
  double gamma = kLogitClamp;  // max-side clip logit
  double s1 = 0.0;             // logit of the first partition share
  double s2 = 0.0;             // logit of the second partition's share of the rest

  /// Uniform partitions: sigma(s1) = 1/3, sigma(s2) = 1/2.
  static LdpParams uniform(double beta = kLogitClamp, double gamma = kLogitClamp);

  bool operator==(const LdpParams&) const = default;
};

struct LdpGrids {
  std::array<double, 3> p{};  // partition shares, sum to 1
  std::array<double, 3> t{};  // thresholds in normalized units
  std::array<double, 4> w{};  // dequantization grid, w0 = 0 and w3 = 1
  double lo = 0.0;            // sigma(beta) * min(group)
  double hi = 0.0;            // sigma(gamma) * max(group)
  double h = 0.0;             // hi - lo

  double normalize(double x) const noexcept;
  /// u(v - t1) + u(v - t2) + u(v - t3) with u(0) = 1.
  std::uint8_t code(double x) const noexcept;
  /// lo + h * w[code]; the outer codes return lo / hi exactly.
  double dequant(std::uint8_t code) const noexcept;
  /// Distance in normalized units from v(x) to the nearest threshold.
  double threshold_distance(double x) const noexcept;
};

LdpGrids derive_grids(double group_min, double group_max, const LdpParams& params);
LdpGrids derive_grids(std::span<const double> group, const LdpParams& params);

struct LdpFakeQuant {
  std::vector<std::uint8_t> codes;
  std::vector<double> w_hat;
  LdpGrids grids;
};

LdpFakeQuant fake_quant(std::span<const double> group, const LdpParams& params);

struct LdpGradients {
  std::vector<double> d_group;  // clipped straight-through estimate
  double d_beta = 0.0;
  double d_gamma = 0.0;
  double d_s1 = 0.0;
  double d_s2 = 0.0;
};

/// Backward pass of fake_quant. Codes are held constant (straight-through
/// through the step functions) and min/max of the group are constants for
/// the step. Parameter gradients are summed against `upstream`.
LdpGradients grads(std::span<const double> group, const LdpParams& params,
                   std::span<const double> upstream);

}  // namespace rcp
