// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rcp {

/// Normalized levels for each side of the learnable centre. Both lists are
/// ordered by magnitude, start at 0 and end at +1 / -1.
struct Nf3Grid {
  std::vector<double> positive;
  std::vector<double> negative;

  /// {0, 1/3, 2/3, 1} and {0, -1/3, -2/3, -1}.
  static Nf3Grid uniform();
  /// Normal-float levels from evenly spaced Gaussian quantiles: four positive
  /// and three negative non-zero levels plus zero (8 levels, 3 bits), each
  /// side scaled so its outermost level is 1 in magnitude.
  static Nf3Grid normal_float(double offset = default_offset());
  static double default_offset();

  std::size_t level_count() const noexcept { return positive.size() + negative.size() - 1; }
};

/// Inverse standard-normal CDF.
double normal_quantile(double p);

struct Nf3Params {
  double beta = 20.0;
  double gamma = 20.0;
  double s1 = 0.0;  // centre position as a logit of the clip range share
};

struct Nf3Scales {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double s_neg = 0.0;  // |c - lo|
  double s_pos = 0.0;  // |hi - c|
};

Nf3Scales derive_nf3_scales(double group_min, double group_max, const Nf3Params& params);

struct Nf3FakeQuant {
  std::vector<std::int8_t> codes;  // +k: positive[k], -k: negative[k]
  std::vector<double> w_hat;
  Nf3Scales scales;
};

Nf3FakeQuant nf3_fake_quant(std::span<const double> group, const Nf3Params& params,
                            const Nf3Grid& grid = Nf3Grid::uniform());

/// Dequantizes one code against explicit scales; +-1 levels return hi / lo.
double nf3_dequant(std::int8_t code, const Nf3Scales& scales, const Nf3Grid& grid);

}  // namespace rcp
