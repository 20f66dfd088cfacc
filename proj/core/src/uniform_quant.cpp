// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/uniform_quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rcp {

namespace {

// std::nearbyint honours the default FE_TONEAREST mode: ties go to even.
double round_even(double v) { return std::nearbyint(v); }

}  // namespace

std::vector<double> UniformQuantResult::dequantized() const {
  std::vector<double> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = dequant(codes[i]);
  return out;
}

UniformQuantResult quant_asym(std::span<const double> group, int bits, std::optional<double> clip_lo,
                              std::optional<double> clip_hi, ZeroPoint rule) {
  if (bits != 2 && bits != 3 && bits != 4 && bits != 8) {
    fail(ErrorKind::kConfig, "unsupported bit width " + std::to_string(bits));
  }
  if (group.empty()) fail(ErrorKind::kDegenerate, "empty group");

  const double lo_clip = clip_lo.value_or(-INFINITY);
  const double hi_clip = clip_hi.value_or(INFINITY);
  std::vector<double> clipped(group.begin(), group.end());
  for (double& v : clipped) v = std::clamp(v, lo_clip, hi_clip);

  const auto [mn, mx] = std::minmax_element(clipped.begin(), clipped.end());
  UniformQuantResult r;
  r.bits = bits;
  r.min = *mn;
  r.max = *mx;
  r.range = r.max - r.min;
  if (!(r.range > 0.0)) fail(ErrorKind::kDegenerate, "group has zero range after clipping");
  const std::int32_t qmax = r.max_code();
  r.step = r.range / qmax;
  const double zero_ref = rule == ZeroPoint::kStepNormalized ? r.min / r.step : r.min / r.range;
  r.zero_point = static_cast<std::int32_t>(-round_even(zero_ref));

  r.codes.resize(clipped.size());
  for (std::size_t i = 0; i < clipped.size(); ++i) {
    const double q = round_even(clipped[i] / r.step) + r.zero_point;
    r.codes[i] = static_cast<std::int32_t>(std::clamp(q, 0.0, static_cast<double>(qmax)));
  }
  return r;
}

QuantizedActivation quant_act_per_token(const Matrix& x, const ActQuantConfig& cfg) {
  if (!(cfg.clip_ratio > 0.0 && cfg.clip_ratio <= 1.0)) {
    fail(ErrorKind::kConfig, "activation clip ratio must lie in (0, 1]");
  }
  if (cfg.bits < 2 || cfg.bits > 8) fail(ErrorKind::kConfig, "unsupported activation bit width");
  const double qmax = (1 << (cfg.bits - 1)) - 1;
  const double qmin = -(1 << (cfg.bits - 1));

  QuantizedActivation out;
  out.tokens = x.rows();
  out.channels = x.cols();
  out.codes.resize(x.size());
  out.scale.resize(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double maxabs = 0.0;
    for (float v : x.row(t)) maxabs = std::max(maxabs, std::abs(static_cast<double>(v)));
    if (maxabs == 0.0) {
      if (!cfg.zero_token_fallback) fail(ErrorKind::kZeroToken, "token " + std::to_string(t) + " is all zeros");
      out.scale[t] = 1.0f;
      continue;
    }
    const double scale = cfg.clip_ratio * maxabs / qmax;
    out.scale[t] = static_cast<float>(scale);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double q = std::clamp(round_even(x(t, c) / scale), qmin, qmax);
      out.codes[t * x.cols() + c] = static_cast<std::int8_t>(q);
    }
  }
  return out;
}

std::vector<UniformQuantResult> quant_kv_group(const Matrix& x, const KvQuantConfig& cfg) {
  if (!(cfg.clip_ratio > 0.0 && cfg.clip_ratio <= 1.0)) fail(ErrorKind::kConfig, "KV clip ratio must lie in (0, 1]");
  const GroupLayout layout(x.rows(), x.cols(), cfg.group_size);
  std::vector<UniformQuantResult> out;
  out.reserve(layout.total_groups());
  std::vector<double> group(cfg.group_size);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t g = 0; g < layout.num_groups(); ++g) {
      for (std::size_t i = 0; i < cfg.group_size; ++i) group[i] = x(t, g * cfg.group_size + i);
      const auto [mn, mx] = std::minmax_element(group.begin(), group.end());
      if (cfg.clip_ratio == 1.0) {
        out.push_back(quant_asym(group, cfg.bits));
        continue;
      }
      const double mid = 0.5 * (*mn + *mx);
      const double half = 0.5 * cfg.clip_ratio * (*mx - *mn);
      out.push_back(quant_asym(group, cfg.bits, mid - half, mid + half));
    }
  }
  return out;
}

}  // namespace rcp
