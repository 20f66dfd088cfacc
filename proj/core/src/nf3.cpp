// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/nf3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rcp/error.hpp"
#include "rcp/ldp.hpp"

namespace rcp {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Acklam's rational approximation, used as the starting point for Halley.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - p_low) {
    const double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

// Index of the nearest level; ties keep the smaller magnitude.
std::size_t nearest_level(double v, const std::vector<double>& levels) {
  std::size_t best = 0;
  double best_dist = std::abs(v - levels[0]);
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const double d = std::abs(v - levels[k]);
    if (d < best_dist) {
      best = k;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::kConfig, "quantile probability must lie in (0, 1)");
  double x = acklam(p);
  for (int iter = 0; iter < 3; ++iter) {
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x -= u / (1 + x * u / 2);
  }
  return x;
}

Nf3Grid Nf3Grid::uniform() { return Nf3Grid{{0.0, 1.0 / 3, 2.0 / 3, 1.0}, {0.0, -1.0 / 3, -2.0 / 3, -1.0}}; }

double Nf3Grid::default_offset() {
  // Midpoint of the two half-step offsets for 7 and 8 intervals.
  return 0.5 * ((1.0 - 1.0 / (2 * 7)) + (1.0 - 1.0 / (2 * 8)));
}

Nf3Grid Nf3Grid::normal_float(double offset) {
  if (!(offset > 0.5 && offset < 1.0)) fail(ErrorKind::kConfig, "normal-float offset must lie in (0.5, 1)");
  // Quantiles at linspace(offset, 0.5, k + 1) without the 0.5 end point.
  auto side = [offset](int k) {
    std::vector<double> levels{0.0};
    const double top = normal_quantile(offset);
    for (int i = k - 1; i >= 0; --i) {
      const double prob = offset + (0.5 - offset) * static_cast<double>(i) / k;
      levels.push_back(normal_quantile(prob) / top);
    }
    levels.back() = 1.0;
    return levels;
  };
  Nf3Grid g;
  g.positive = side(4);
  g.negative = side(3);
  for (double& v : g.negative) v = -v;
  return g;
}

Nf3Scales derive_nf3_scales(double group_min, double group_max, const Nf3Params& params) {
  Nf3Scales s;
  s.lo = sigmoid(params.beta) * group_min;
  s.hi = sigmoid(params.gamma) * group_max;
  const double h = s.hi - s.lo;
  if (!(h > 0.0)) fail(ErrorKind::kInvalidRange, "NF3 clip range is empty");
  s.center = s.lo + h * sigmoid(params.s1);
  s.s_neg = std::abs(s.center - s.lo);
  s.s_pos = std::abs(s.hi - s.center);
  if (!(s.s_neg > 0.0) || !(s.s_pos > 0.0)) fail(ErrorKind::kDegenerate, "NF3 side scale is zero");
  return s;
}

double nf3_dequant(std::int8_t code, const Nf3Scales& scales, const Nf3Grid& grid) {
  if (code > 0) {
    const auto k = static_cast<std::size_t>(code);
    if (k + 1 == grid.positive.size()) return scales.hi;
    return grid.positive[k] * scales.s_pos + scales.center;
  }
  if (code < 0) {
    const auto k = static_cast<std::size_t>(-code);
    if (k + 1 == grid.negative.size()) return scales.lo;
    return grid.negative[k] * scales.s_neg + scales.center;
  }
  return scales.center;
}

Nf3FakeQuant nf3_fake_quant(std::span<const double> group, const Nf3Params& params, const Nf3Grid& grid) {
  if (group.empty()) fail(ErrorKind::kDegenerate, "empty group");
  if (grid.positive.size() < 2 || grid.negative.size() < 2) fail(ErrorKind::kConfig, "NF3 grid side too small");
  const auto [mn, mx] = std::minmax_element(group.begin(), group.end());
  Nf3FakeQuant out;
  out.scales = derive_nf3_scales(*mn, *mx, params);
  const Nf3Scales& s = out.scales;
  out.codes.resize(group.size());
  out.w_hat.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double x = group[i];
    std::int8_t code;
    if (x > s.center) {
      const double v = std::min((x - s.center) / s.s_pos, 1.0);
      code = static_cast<std::int8_t>(nearest_level(v, grid.positive));
    } else {
      const double v = std::max((x - s.center) / s.s_neg, -1.0);
      code = static_cast<std::int8_t>(-static_cast<int>(nearest_level(v, grid.negative)));
    }
    out.codes[i] = code;
    out.w_hat[i] = nf3_dequant(code, s, grid);
  }
  return out;
}

}  // namespace rcp
