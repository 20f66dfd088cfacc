// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcp/parallel.hpp"

namespace rcp {

namespace {

constexpr double kDegenerateEps = 1e-6;

MatrixD column_block(const MatrixD& x, std::size_t begin, std::size_t width) {
  MatrixD out(x.rows(), width);
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < width; ++i) out(t, i) = x(t, begin + i);
  return out;
}

std::vector<double> clipped_group(std::span<const double> group, double lo, double hi) {
  std::vector<double> out(group.begin(), group.end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace

double grid_fraction(std::size_t i, std::size_t n, double lo, double hi) {
  if (n < 2) return hi;
  const double steps = static_cast<double>(n - 1);
  return (lo * (steps - static_cast<double>(i)) + hi * static_cast<double>(i)) / steps;
}

double fraction_to_logit(double fraction) {
  if (fraction >= sigmoid(kLogitClamp)) return kLogitClamp;
  if (fraction <= sigmoid(-kLogitClamp)) return -kLogitClamp;
  return logit(fraction);
}

double clip_objective(std::span<const double> group, const MatrixD& x_cols, double lo_fraction,
                      double hi_fraction, const ClipSearchConfig& cfg) {
  const auto [mn, mx] = std::minmax_element(group.begin(), group.end());
  const double lo = lo_fraction * *mn;
  const double hi = hi_fraction * *mx;
  const auto q = quant_asym(group, cfg.bits, lo, hi, cfg.zero_point);
  std::vector<double> err(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) err[i] = q.dequant(q.codes[i]) - group[i];
  double total = 0.0;
  for (std::size_t t = 0; t < x_cols.rows(); ++t) {
    double acc = 0.0;
    const auto xr = x_cols.row(t);
    for (std::size_t i = 0; i < err.size(); ++i) acc += xr[i] * err[i];
    total += acc * acc;
  }
  return total;
}

ClipSearchResult grid_search_clip(const Matrix& w_r, const Matrix& x_r, const GroupLayout& layout,
                                  const ClipSearchConfig& cfg) {
  return grid_search_clip(to_double(w_r), to_double(x_r), layout, cfg);
}

ClipSearchResult grid_search_clip(const MatrixD& w_r, const MatrixD& x_r, const GroupLayout& layout,
                                  const ClipSearchConfig& cfg) {
  if (w_r.rows() != layout.out_channels || w_r.cols() != layout.in_channels) {
    fail(ErrorKind::kShape, "weight does not match group layout");
  }
  if (x_r.cols() != layout.in_channels) fail(ErrorKind::kShape, "calibration activations width differs from C");
  if (cfg.grid_points < 2) fail(ErrorKind::kConfig, "clip grid needs at least 2 points per axis");
  if (!(cfg.min_fraction > 0.0 && cfg.min_fraction < cfg.max_fraction && cfg.max_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "clip search interval must satisfy 0 < lo < hi <= 1");
  }

  const std::size_t n_groups = layout.num_groups();
  const std::size_t gsize = layout.group_size;
  std::vector<MatrixD> blocks;
  blocks.reserve(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) blocks.push_back(column_block(x_r, g * gsize, gsize));

  ClipSearchResult result;
  result.layout = layout;
  result.groups.resize(layout.total_groups());

  parallel_for(layout.total_groups(), [&](std::size_t idx) {
    const std::size_t h = idx / n_groups;
    const std::size_t g = idx % n_groups;
    std::vector<double> group(gsize);
    for (std::size_t i = 0; i < gsize; ++i) group[i] = w_r(h, g * gsize + i);
    const auto [mn, mx] = std::minmax_element(group.begin(), group.end());

    ClipChoice& choice = result.groups[idx];
    if (*mn == *mx) {
      choice.degenerate = true;
      choice.beta = choice.gamma = logit(1.0 - kDegenerateEps);
      choice.lo_fraction = choice.hi_fraction = 1.0 - kDegenerateEps;
      return;
    }

    double best = std::numeric_limits<double>::infinity();
    double best_range = -1.0;
    for (std::size_t j = cfg.grid_points; j-- > 0;) {
      const double fh = grid_fraction(j, cfg.grid_points, cfg.min_fraction, cfg.max_fraction);
      for (std::size_t i = cfg.grid_points; i-- > 0;) {
        const double fl = grid_fraction(i, cfg.grid_points, cfg.min_fraction, cfg.max_fraction);
        const double range = fh * *mx - fl * *mn;
        double obj;
        try {
          obj = clip_objective(group, blocks[g], fl, fh, cfg);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kDegenerate) throw;
          continue;  // clip collapsed the group to a point
        }
        if (i + 1 == cfg.grid_points && j + 1 == cfg.grid_points) choice.unclipped_objective = obj;
        if (obj < best || (obj == best && range > best_range)) {
          best = obj;
          best_range = range;
          choice.lo_fraction = fl;
          choice.hi_fraction = fh;
        }
      }
    }
    choice.objective = best;
    choice.beta = fraction_to_logit(choice.lo_fraction);
    choice.gamma = fraction_to_logit(choice.hi_fraction);
  });

  for (std::size_t idx = 0; idx < result.groups.size(); ++idx) {
    if (result.groups[idx].degenerate) {
      result.warnings.push_back("group (" + std::to_string(idx / n_groups) + ", " + std::to_string(idx % n_groups) +
                                ") is constant; clip logits set to logit(1 - 1e-6)");
    }
  }
  return result;
}

std::vector<LdpParams> ldp_init(const GroupLayout& layout, const ClipSearchResult& clip) {
  if (clip.groups.size() != layout.total_groups()) fail(ErrorKind::kShape, "clip result does not match layout");
  std::vector<LdpParams> params;
  params.reserve(clip.groups.size());
  for (const auto& c : clip.groups) params.push_back(LdpParams::uniform(c.beta, c.gamma));
  return params;
}

ClippedQuant clipped_uniform_fake_quant(const MatrixD& w, const MatrixD& x, const GroupLayout& layout,
                                        const ClipSearchConfig& cfg) {
  ClippedQuant out;
  out.clip = grid_search_clip(w, x, layout, cfg);
  out.clipped = MatrixD(w.rows(), w.cols());
  out.dequantized = MatrixD(w.rows(), w.cols());
  const std::size_t gsize = layout.group_size;
  for (std::size_t h = 0; h < layout.out_channels; ++h) {
    for (std::size_t g = 0; g < layout.num_groups(); ++g) {
      std::span<const double> group(w.row(h).data() + g * gsize, gsize);
      const ClipChoice& c = out.clip.at(h, g);
      const auto [mn, mx] = std::minmax_element(group.begin(), group.end());
      if (c.degenerate) {
        for (std::size_t i = 0; i < gsize; ++i) {
          out.clipped(h, g * gsize + i) = group[i];
          out.dequantized(h, g * gsize + i) = group[i];
        }
        continue;
      }
      const double lo = c.lo_fraction * *mn;
      const double hi = c.hi_fraction * *mx;
      const auto clipped = clipped_group(group, lo, hi);
      const auto q = quant_asym(group, cfg.bits, lo, hi, cfg.zero_point);
      for (std::size_t i = 0; i < gsize; ++i) {
        out.clipped(h, g * gsize + i) = clipped[i];
        out.dequantized(h, g * gsize + i) = q.dequant(q.codes[i]);
      }
    }
  }
  return out;
}

}  // namespace rcp
