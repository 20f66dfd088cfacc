// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcp/layout.hpp"
#include "rcp/matrix.hpp"
#include "rcp/rng.hpp"
#include "rcp/rotation.hpp"

namespace rcp {

/// m4 / m2^2 - 3 with biased central sample moments.
double excess_kurtosis(std::span<const double> samples);
double excess_kurtosis(std::span<const float> samples);

struct KurtosisReport {
  MatrixD kurtosis;  // (N, H): group g of output channel h at (g, h)
  double platykurtic_fraction = 0.0;

  /// Mean over the N groups of each output channel.
  std::vector<double> channel_mean() const;
  double mean() const;
};

/// Views the weight as (N, G, H) and takes the kurtosis along G.
KurtosisReport groupwise_kurtosis(const MatrixD& w, const GroupLayout& layout);
KurtosisReport groupwise_kurtosis(const Matrix& w, const GroupLayout& layout);

/// A weight fake-quantizer: given W (H, C) and matching activations X (T, C),
/// returns the clipped weight and its dequantized quantization.
struct FakeQuantOutput {
  MatrixD clipped;
  MatrixD dequantized;
};
using WeightQuantizer = std::function<FakeQuantOutput(const MatrixD& w, const MatrixD& x, const GroupLayout&)>;

struct QErrReport {
  std::size_t tokens = 0;
  std::vector<double> qerr_before;  // per output channel
  std::vector<double> qerr_after;
  std::vector<double> kurt_before;  // N-averaged group kurtosis per channel
  std::vector<double> kurt_after;
  std::vector<double> delta_kurt;
  std::vector<double> delta_qerr;
  double spearman = 0.0;  // rank correlation of (delta_kurt, delta_qerr)
};

/// Mean over tokens of |X (Q(W) - W)^T| per output channel, before and after
/// rotating the input dimension (W <- W R, X <- X R). rotation == nullptr is
/// the identity.
QErrReport qerr_vs_kurt(const MatrixD& w, const MatrixD& x, const HadamardMatrix* rotation,
                        const WeightQuantizer& quantizer, const GroupLayout& layout);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

enum class Distribution { kUniform, kRademacher, kGaussian, kArcsine };

Distribution parse_distribution(std::string_view name);
std::string_view to_string(Distribution d);
/// Excess kurtosis of the zero-mean unit-support distribution itself.
double distribution_kurtosis(Distribution d);
double sample(Distribution d, SeededRng& rng);

struct Lemma1Report {
  Distribution dist = Distribution::kUniform;
  std::size_t n = 0;
  std::size_t trials = 0;
  double kurt_before = 0.0;
  double kurt_after = 0.0;
  double expected_after = 0.0;  // Kurt(X) / n
  double mean_first = 0.0;      // E[Y_1]
  double mean_rest = 0.0;       // pooled mean of Y_2..Y_n
  double var_before = 0.0;
  double var_after_min = 0.0;   // extremes of the per-component variances of Y
  double var_after_max = 0.0;
};

/// Draws `trials` i.i.d. vectors of length n, applies the normalized Hadamard
/// and reports pooled kurtosis of X and of all components of Y. `shift` is
/// added to every draw (non-zero shifts move E[Y_1] to sqrt(n) * shift).
Lemma1Report lemma1_mc(Distribution dist, std::size_t n, std::size_t trials, SeededRng& rng,
                       double shift = 0.0);

}  // namespace rcp
