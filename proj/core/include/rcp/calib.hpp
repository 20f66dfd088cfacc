// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rcp/layout.hpp"
#include "rcp/ldp.hpp"
#include "rcp/matrix.hpp"
#include "rcp/uniform_quant.hpp"

namespace rcp {

struct ClipSearchConfig {
  std::size_t grid_points = 64;  // per axis
  double min_fraction = 0.5;     // search interval for sigma(beta), sigma(gamma)
  double max_fraction = 1.0;
  int bits = 2;
  ZeroPoint zero_point = ZeroPoint::kStepNormalized;
};

struct ClipChoice {
  double beta = 0.0;
  double gamma = 0.0;
  double lo_fraction = 1.0;  // the sigma(beta) value that was evaluated
  double hi_fraction = 1.0;
  double objective = 0.0;
  double unclipped_objective = 0.0;  // objective at (max_fraction, max_fraction)
  bool degenerate = false;
};

struct ClipSearchResult {
  GroupLayout layout;
  std::vector<ClipChoice> groups;  // index h * N + g
  std::vector<std::string> warnings;

  const ClipChoice& at(std::size_t h, std::size_t g) const { return groups[h * layout.num_groups() + g]; }
};

/// i-th of n evenly spaced fractions in [lo, hi], computed so that coarser
/// grids whose spacing divides a finer one reproduce identical values.
double grid_fraction(std::size_t i, std::size_t n, double lo, double hi);

/// Logit of a clip fraction; 1.0 maps to the training clamp.
double fraction_to_logit(double fraction);

/// Output-reconstruction error of one group at fixed clip fractions:
/// || X_g (Q(W_rc) - W_r)^T ||^2 over the calibration tokens, with W_r the
/// unclipped rotated weights.
double clip_objective(std::span<const double> group, const MatrixD& x_cols, double lo_fraction,
                      double hi_fraction, const ClipSearchConfig& cfg);

/// Exhaustive per-group search over (sigma(beta), sigma(gamma)).
/// x_r is (tokens, C). Ties go to the wider clip range.
ClipSearchResult grid_search_clip(const Matrix& w_r, const Matrix& x_r, const GroupLayout& layout,
                                  const ClipSearchConfig& cfg = {});
ClipSearchResult grid_search_clip(const MatrixD& w_r, const MatrixD& x_r, const GroupLayout& layout,
                                  const ClipSearchConfig& cfg = {});

/// LDP starting point: searched clip logits with uniform partitions.
std::vector<LdpParams> ldp_init(const GroupLayout& layout, const ClipSearchResult& clip);

struct ClippedQuant {
  MatrixD clipped;      // W_rc
  MatrixD dequantized;  // Q(W_rc), dequantized
  ClipSearchResult clip;
};

/// Grid-searched clipping followed by the asymmetric integer quantizer.
ClippedQuant clipped_uniform_fake_quant(const MatrixD& w, const MatrixD& x, const GroupLayout& layout,
                                        const ClipSearchConfig& cfg = {});

}  // namespace rcp
