// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

// Toy-scale quantization-aware distillation: an MLP teacher in full
// precision, a student whose weights pass through the LDP fake quantizer,
// and a confidence-weighted blend of forward and reverse KL as the loss.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcp/calib.hpp"
#include "rcp/layout.hpp"
#include "rcp/ldp.hpp"
#include "rcp/matrix.hpp"
#include "rcp/rng.hpp"

namespace rcp {

enum class Nonlinearity { kRelu, kIdentity };

struct ToyLayer {
  MatrixD weight;  // (out, in)
  GroupLayout layout;
  std::optional<std::vector<LdpParams>> quant;  // per group, h * N + g
};

struct ToyModel {
  std::vector<ToyLayer> layers;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;

  std::size_t inputs() const { return layers.front().weight.cols(); }
  std::size_t classes() const { return layers.back().weight.rows(); }
};

struct ToyModelSpec {
  std::vector<std::size_t> widths{64, 64, 16};  // input, hidden..., classes
  std::size_t group_size = 16;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;
  double logit_gain = 3.0;  // scales the teacher's output layer
};

struct LabeledDataset {
  MatrixD inputs;                   // (examples, inputs)
  std::vector<std::size_t> labels;  // reference label per example
};

/// Teacher with i.i.d. uniform (platykurtic) weights, He-scaled per layer.
ToyModel make_teacher(const ToyModelSpec& spec, SeededRng& rng);

/// Gaussian inputs; labels drawn from the teacher's own predictive distribution.
LabeledDataset make_dataset(const ToyModel& teacher, std::size_t examples, SeededRng& rng);

/// Copy of the teacher with every layer quantized by LDP. Clip logits come
/// from the grid search on each layer's calibration inputs; partitions start
/// uniform.
ToyModel make_student(const ToyModel& teacher, const MatrixD& calib_inputs, const ClipSearchConfig& clip = {});

/// Logits for each row of x. Quantized layers use their fake-quantized weight.
MatrixD forward_logits(const ToyModel& model, const MatrixD& x);
MatrixD softmax_rows(const MatrixD& logits);

/// D_KL(p || q) in nats with both arguments floored at 1e-12.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Mean over rows of alpha * KL(S || T) + (1 - alpha) * KL(T || S).
double cakld(const MatrixD& p_teacher, const MatrixD& p_student, double alpha);

enum class ConfidenceMode {
  kLabelProbability,  // teacher probability of the reference label
  kTopProbability,    // teacher top-1 probability
};

double estimate_alpha(const ToyModel& teacher, const LabeledDataset& calib,
                      ConfidenceMode mode = ConfidenceMode::kLabelProbability);

struct QuantParamGrad {
  double beta = 0, gamma = 0, s1 = 0, s2 = 0;
};

struct ModelGradients {
  std::vector<MatrixD> weight;                      // straight-through, per layer
  std::vector<MatrixD> dequantized;                 // dL / dW_hat, per layer
  std::vector<std::vector<QuantParamGrad>> quant;   // per layer, per group
};

struct LossAndGrad {
  double loss = 0.0;
  ModelGradients grads;
};

/// CAKLD of the student against precomputed teacher log-probabilities and
/// its analytic gradient through the fake quantizers.
LossAndGrad loss_and_grad(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs, double alpha);
double distill_loss(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs, double alpha);
MatrixD log_softmax_rows(const MatrixD& logits);

enum class LrSchedule {
  kConstant,
  kCosine,  // decays both rates to zero over the run
};

struct DistillConfig {
  std::optional<double> alpha;  // estimated from the teacher when empty
  ConfidenceMode confidence = ConfidenceMode::kLabelProbability;
  double lr_weights = 1e-3;
  double lr_quantparams = 1e-2;
  LrSchedule schedule = LrSchedule::kConstant;
  std::size_t steps = 200;
  std::size_t batch = 32;
  std::size_t train_examples = 256;
  std::size_t eval_examples = 512;
  std::uint64_t seed = 0;
  bool freeze_partitions = false;  // keep s1, s2 at their initial values
  bool rotate = true;  // fuse a randomized Hadamard into the input side before step 0
  std::size_t calib_examples = 64;  // prefix of the training set used for the clip search
  ClipSearchConfig clip{.grid_points = 32};
  ToyModelSpec model;
};

struct GroupSnapshot {
  std::size_t layer = 0;
  std::size_t group = 0;  // h * N + g
  LdpParams params;
  LdpGrids grids;
};

struct TrainingReport {
  double alpha = 0.0;
  std::vector<double> loss;  // full-train-set loss before each step, plus the final loss
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double agreement = 0.0;      // held-out argmax agreement with the teacher
  double max_loss_spike = 0.0; // largest step-to-step loss increase
  std::vector<GroupSnapshot> grids;
};

/// Deterministic for a given config: single-threaded, fixed reduction order.
TrainingReport train_toy(const DistillConfig& cfg);

struct GradCheckPoint {
  std::size_t layer = 0;
  std::size_t group = 0;
  std::string parameter;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckExclusion {
  std::size_t layer = 0;
  std::size_t group = 0;
  double threshold_distance = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckPoint> points;
  std::vector<GradCheckExclusion> excluded;
  double max_rel_error = 0.0;
};

inline constexpr double kThresholdMargin = 1e-3;

/// Central finite differences (binary64) on beta, gamma, s1, s2 of randomly
/// chosen groups and on one dequantized weight per group, against the
/// analytic gradients. Groups with any element within 1e-3 of a threshold
/// (normalized units) are skipped and recorded.
GradCheckReport grad_check(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs,
                           double alpha, std::size_t points, std::uint64_t seed, double step = 1e-4);

/// A student at a random interior state, with data, for gradient checks.
struct GradCheckProblem {
  ToyModel student;
  MatrixD inputs;
  MatrixD teacher_log_probs;
  double alpha = 0.5;
};
GradCheckProblem make_grad_check_problem(const ToyModelSpec& spec, std::uint64_t seed, std::size_t examples = 32);

struct InvarianceReport {
  double max_rel_deviation = 0.0;
  double kurt_before = 0.0;  // mean group-wise kurtosis of the first layer
  double kurt_after = 0.0;
  double kurt_delta = 0.0;
  std::size_t rotations_fused = 0;
};

/// Full-precision outputs before and after fusing randomized Hadamard
/// rotations at the linear-layer boundaries (input, hidden boundaries for
/// the identity nonlinearity, and the output, undone online). No seed means
/// the identity rotation.
InvarianceReport invariance_check(const ToyModelSpec& spec, std::uint64_t model_seed,
                                  std::optional<std::uint64_t> rotation_seed, std::size_t tokens = 64);

}  // namespace rcp
