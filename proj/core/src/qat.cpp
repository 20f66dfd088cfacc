// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/qat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "rcp/error.hpp"
#include "rcp/rotation.hpp"
#include "rcp/stats.hpp"

namespace rcp {
namespace {

constexpr double kProbFloor = 1e-12;

std::span<const double> group_span(const MatrixD& w, const GroupLayout& layout, std::size_t idx) {
  const std::size_t n = layout.num_groups();
  const std::size_t h = idx / n;
  const std::size_t g = idx % n;
  return w.row(h).subspan(g * layout.group_size, layout.group_size);
}

std::vector<MatrixD> dequantized_weights(const ToyModel& model) {
  std::vector<MatrixD> out;
  out.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    if (!layer.quant) {
      out.push_back(layer.weight);
      continue;
    }
    MatrixD w_hat(layer.weight.rows(), layer.weight.cols());
    const std::size_t n = layer.layout.num_groups();
    const std::size_t gs = layer.layout.group_size;
    for (std::size_t idx = 0; idx < layer.layout.total_groups(); ++idx) {
      const auto fq = fake_quant(group_span(layer.weight, layer.layout, idx), (*layer.quant)[idx]);
      auto dst = w_hat.row(idx / n).subspan((idx % n) * gs, gs);
      std::copy(fq.w_hat.begin(), fq.w_hat.end(), dst.begin());
    }
    out.push_back(std::move(w_hat));
  }
  return out;
}

// z = x W^T, x is (batch, in), w is (out, in).
MatrixD linear(const MatrixD& x, const MatrixD& w) {
  if (x.cols() != w.cols()) fail(ErrorKind::kShape, "input width does not match layer");
  MatrixD z(x.rows(), w.rows());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const auto xr = x.row(b);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const auto wr = w.row(o);
      double acc = 0.0;
      for (std::size_t i = 0; i < xr.size(); ++i) acc += xr[i] * wr[i];
      z(b, o) = acc;
    }
  }
  return z;
}

struct ForwardCache {
  std::vector<MatrixD> inputs;  // input to each layer
  std::vector<MatrixD> pre;     // pre-activation of each layer
};

MatrixD forward_with(const ToyModel& model, const std::vector<MatrixD>& w_hat, const MatrixD& x,
                     ForwardCache* cache) {
  MatrixD a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    MatrixD z = linear(a, w_hat[l]);
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    if (l + 1 == model.layers.size()) return z;
    if (model.nonlinearity == Nonlinearity::kRelu) {
      for (double& v : z.data()) v = std::max(v, 0.0);
    }
    a = std::move(z);
  }
  return a;
}

void check_rows(const MatrixD& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorKind::kData, std::string(what) + " row " + std::to_string(r) + " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      fail(ErrorKind::kData, std::string(what) + " row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
}

double row_loss(std::span<const double> ls, std::span<const double> lt, double alpha) {
  double rev = 0.0;
  double fwd = 0.0;
  for (std::size_t k = 0; k < ls.size(); ++k) {
    rev += std::exp(ls[k]) * (ls[k] - lt[k]);
    fwd += std::exp(lt[k]) * (lt[k] - ls[k]);
  }
  return alpha * rev + (1.0 - alpha) * fwd;
}

MatrixD fill_uniform(std::size_t rows, std::size_t cols, double a, SeededRng& rng) {
  MatrixD w(rows, cols);
  for (double& v : w.data()) v = rng.uniform(-a, a);
  return w;
}

struct Adam {
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t t = 0;

  void update(double& param, double grad, double& m, double& v, double lr) const {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    const double mh = m / (1.0 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1.0 - std::pow(b2, static_cast<double>(t)));
    param -= lr * mh / (std::sqrt(vh) + eps);
  }
};

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

MatrixD take_rows(const MatrixD& m, std::span<const std::size_t> idx) {
  MatrixD out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

MatrixD take_prefix(const MatrixD& m, std::size_t rows) {
  rows = std::min(rows, m.rows());
  MatrixD out(rows, m.cols());
  std::copy(m.data().begin(), m.data().begin() + static_cast<std::ptrdiff_t>(rows * m.cols()), out.data().begin());
  return out;
}

double normwise_deviation(const MatrixD& ref, const MatrixD& got) {
  const double scale = max_abs(ref);
  const double diff = max_abs_diff(ref, got);
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace

ToyModel make_teacher(const ToyModelSpec& spec, SeededRng& rng) {
  if (spec.widths.size() < 2) fail(ErrorKind::kConfig, "toy model needs at least an input and an output width");
  ToyModel m;
  m.nonlinearity = spec.nonlinearity;
  const bool relu = spec.nonlinearity == Nonlinearity::kRelu;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const bool last = l + 2 == spec.widths.size();
    double a = std::sqrt((relu ? 6.0 : 3.0) / static_cast<double>(in));
    if (last) a = spec.logit_gain * std::sqrt(3.0 / static_cast<double>(in));
    m.layers.push_back({fill_uniform(out, in, a, rng), GroupLayout(out, in, spec.group_size), std::nullopt});
  }
  return m;
}

LabeledDataset make_dataset(const ToyModel& teacher, std::size_t examples, SeededRng& rng) {
  LabeledDataset d;
  d.inputs = MatrixD(examples, teacher.inputs());
  for (double& v : d.inputs.data()) v = rng.normal();
  const MatrixD p = softmax_rows(forward_logits(teacher, d.inputs));
  d.labels.resize(examples);
  for (std::size_t r = 0; r < examples; ++r) {
    const double u = rng.uniform01();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < p.cols(); ++k) {
      acc += p(r, k);
      if (u < acc) break;
    }
    d.labels[r] = k;
  }
  return d;
}

ToyModel make_student(const ToyModel& teacher, const MatrixD& calib_inputs, const ClipSearchConfig& clip) {
  ToyModel s = teacher;
  ForwardCache cache;
  forward_with(teacher, dequantized_weights(teacher), calib_inputs, &cache);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    auto& layer = s.layers[l];
    const auto search = grid_search_clip(layer.weight, cache.inputs[l], layer.layout, clip);
    layer.quant = ldp_init(layer.layout, search);
  }
  return s;
}

MatrixD forward_logits(const ToyModel& model, const MatrixD& x) {
  return forward_with(model, dequantized_weights(model), x, nullptr);
}

MatrixD log_softmax_rows(const MatrixD& logits) {
  MatrixD out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < z.size(); ++k) out(r, k) = z[k] - lse;
  }
  return out;
}

MatrixD softmax_rows(const MatrixD& logits) {
  MatrixD out = log_softmax_rows(logits);
  for (double& v : out.data()) v = std::exp(v);
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorKind::kShape, "distributions have different lengths");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(p[k], kProbFloor);
    const double qk = std::max(q[k], kProbFloor);
    kl += pk * std::log(pk / qk);
  }
  return kl;
}

double cakld(const MatrixD& p_teacher, const MatrixD& p_student, double alpha) {
  if (p_teacher.rows() != p_student.rows() || p_teacher.cols() != p_student.cols()) {
    fail(ErrorKind::kShape, "teacher and student distributions differ in shape");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::kConfig, "alpha must lie in [0, 1]");
  if (p_teacher.rows() == 0) fail(ErrorKind::kConfig, "no rows to compare");
  check_rows(p_teacher, "teacher");
  check_rows(p_student, "student");
  double total = 0.0;
  for (std::size_t r = 0; r < p_teacher.rows(); ++r) {
    total += alpha * kl_divergence(p_student.row(r), p_teacher.row(r)) +
             (1.0 - alpha) * kl_divergence(p_teacher.row(r), p_student.row(r));
  }
  return total / static_cast<double>(p_teacher.rows());
}

double estimate_alpha(const ToyModel& teacher, const LabeledDataset& calib, ConfidenceMode mode) {
  if (calib.inputs.rows() == 0) fail(ErrorKind::kConfig, "calibration set is empty");
  if (calib.labels.size() != calib.inputs.rows()) fail(ErrorKind::kShape, "labels do not match inputs");
  const MatrixD p = softmax_rows(forward_logits(teacher, calib.inputs));
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = p.row(r);
    if (mode == ConfidenceMode::kTopProbability) {
      total += row[argmax(row)];
    } else {
      if (calib.labels[r] >= row.size()) fail(ErrorKind::kData, "label out of range at row " + std::to_string(r));
      total += row[calib.labels[r]];
    }
  }
  return total / static_cast<double>(p.rows());
}

double distill_loss(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs, double alpha) {
  const MatrixD ls = log_softmax_rows(forward_logits(student, x));
  if (ls.rows() != teacher_log_probs.rows() || ls.cols() != teacher_log_probs.cols()) {
    fail(ErrorKind::kShape, "teacher log-probabilities do not match the batch");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < ls.rows(); ++r) total += row_loss(ls.row(r), teacher_log_probs.row(r), alpha);
  return total / static_cast<double>(ls.rows());
}

LossAndGrad loss_and_grad(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs, double alpha) {
  const auto w_hat = dequantized_weights(student);
  ForwardCache cache;
  const MatrixD logits = forward_with(student, w_hat, x, &cache);
  const MatrixD ls = log_softmax_rows(logits);
  if (ls.rows() != teacher_log_probs.rows() || ls.cols() != teacher_log_probs.cols()) {
    fail(ErrorKind::kShape, "teacher log-probabilities do not match the batch");
  }
  const std::size_t batch = ls.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  LossAndGrad out;
  MatrixD dz(batch, ls.cols());
  for (std::size_t r = 0; r < batch; ++r) {
    const auto lsr = ls.row(r);
    const auto ltr = teacher_log_probs.row(r);
    double rev = 0.0;
    for (std::size_t k = 0; k < lsr.size(); ++k) rev += std::exp(lsr[k]) * (lsr[k] - ltr[k]);
    out.loss += row_loss(lsr, ltr, alpha);
    for (std::size_t k = 0; k < lsr.size(); ++k) {
      const double s = std::exp(lsr[k]);
      const double t = std::exp(ltr[k]);
      dz(r, k) = inv_b * (alpha * s * ((lsr[k] - ltr[k]) - rev) + (1.0 - alpha) * (s - t));
    }
  }
  out.loss *= inv_b;

  const std::size_t layers = student.layers.size();
  out.grads.weight.resize(layers);
  out.grads.dequantized.resize(layers);
  out.grads.quant.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    const MatrixD& a = cache.inputs[l];
    MatrixD dw(w_hat[l].rows(), w_hat[l].cols());
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < dw.rows(); ++o) {
        const double g = dz(b, o);
        if (g == 0.0) continue;
        auto dwr = dw.row(o);
        const auto ar = a.row(b);
        for (std::size_t i = 0; i < ar.size(); ++i) dwr[i] += g * ar[i];
      }
    }
    if (l > 0) {
      MatrixD da(batch, w_hat[l].cols());
      for (std::size_t b = 0; b < batch; ++b) {
        auto dar = da.row(b);
        for (std::size_t o = 0; o < w_hat[l].rows(); ++o) {
          const double g = dz(b, o);
          if (g == 0.0) continue;
          const auto wr = w_hat[l].row(o);
          for (std::size_t i = 0; i < dar.size(); ++i) dar[i] += g * wr[i];
        }
      }
      if (student.nonlinearity == Nonlinearity::kRelu) {
        const MatrixD& pre = cache.pre[l - 1];
        for (std::size_t k = 0; k < da.size(); ++k) {
          if (!(pre.data()[k] > 0.0)) da.data()[k] = 0.0;
        }
      }
      dz = std::move(da);
    }

    const ToyLayer& layer = student.layers[l];
    if (!layer.quant) {
      out.grads.weight[l] = dw;
    } else {
      MatrixD gw(dw.rows(), dw.cols());
      auto& qg = out.grads.quant[l];
      qg.resize(layer.layout.total_groups());
      const std::size_t n = layer.layout.num_groups();
      const std::size_t gs = layer.layout.group_size;
      for (std::size_t idx = 0; idx < qg.size(); ++idx) {
        const auto up = group_span(dw, layer.layout, idx);
        const auto g = grads(group_span(layer.weight, layer.layout, idx), (*layer.quant)[idx], up);
        qg[idx] = {g.d_beta, g.d_gamma, g.d_s1, g.d_s2};
        auto dst = gw.row(idx / n).subspan((idx % n) * gs, gs);
        std::copy(g.d_group.begin(), g.d_group.end(), dst.begin());
      }
      out.grads.weight[l] = std::move(gw);
    }
    out.grads.dequantized[l] = std::move(dw);
  }
  return out;
}

TrainingReport train_toy(const DistillConfig& cfg) {
  if (cfg.batch == 0) fail(ErrorKind::kConfig, "batch size must be positive");
  if (cfg.train_examples == 0) fail(ErrorKind::kConfig, "training set is empty");
  if (cfg.lr_weights < 0.0 || cfg.lr_quantparams < 0.0) fail(ErrorKind::kConfig, "learning rates must be non-negative");
  if (cfg.alpha && !(*cfg.alpha >= 0.0 && *cfg.alpha <= 1.0)) fail(ErrorKind::kConfig, "alpha must lie in [0, 1]");

  SeededRng root(cfg.seed);
  SeededRng model_rng = root.fork(1);
  SeededRng train_rng = root.fork(2);
  SeededRng eval_rng = root.fork(3);
  SeededRng order_rng = root.fork(4);

  ToyModel teacher = make_teacher(cfg.model, model_rng);
  LabeledDataset train = make_dataset(teacher, cfg.train_examples, train_rng);
  LabeledDataset eval = make_dataset(teacher, cfg.eval_examples, eval_rng);
  if (cfg.rotate) {
    // Same function in the rotated basis: W1 R on the weights, X R online.
    SeededRng rot_rng = root.fork(5);
    const HadamardMatrix r = randomized_hadamard(teacher.inputs(), rot_rng);
    teacher.layers.front().weight = fuse(teacher.layers.front().weight, nullptr, &r);
    train.inputs = apply_online(train.inputs, r);
    eval.inputs = apply_online(eval.inputs, r);
  }
  ToyModel student = make_student(teacher, take_prefix(train.inputs, cfg.calib_examples), cfg.clip);

  TrainingReport report;
  report.alpha = cfg.alpha ? *cfg.alpha : estimate_alpha(teacher, train, cfg.confidence);
  const MatrixD teacher_lp = log_softmax_rows(forward_logits(teacher, train.inputs));

  const std::size_t layers = student.layers.size();
  std::vector<MatrixD> m_w, v_w;
  std::vector<std::vector<std::array<double, 4>>> m_q(layers), v_q(layers);
  for (const auto& layer : student.layers) {
    m_w.emplace_back(layer.weight.rows(), layer.weight.cols());
    v_w.emplace_back(layer.weight.rows(), layer.weight.cols());
  }
  for (std::size_t l = 0; l < layers; ++l) {
    m_q[l].assign(student.layers[l].layout.total_groups(), {});
    v_q[l].assign(student.layers[l].layout.total_groups(), {});
  }

  std::vector<std::size_t> order(cfg.train_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<std::size_t> batch_idx(cfg.batch);
  Adam adam;

  auto record = [&](std::size_t step) {
    const double loss = distill_loss(student, train.inputs, teacher_lp, report.alpha);
    if (!std::isfinite(loss)) {
      fail(ErrorKind::kTraining, "loss became non-finite at step " + std::to_string(step));
    }
    report.loss.push_back(loss);
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    record(step);
    for (auto& i : batch_idx) {
      if (cursor == order.size()) {
        order_rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      i = order[cursor++];
    }
    const MatrixD xb = take_rows(train.inputs, batch_idx);
    const MatrixD tb = take_rows(teacher_lp, batch_idx);
    const LossAndGrad lg = loss_and_grad(student, xb, tb, report.alpha);
    if (!std::isfinite(lg.loss)) {
      fail(ErrorKind::kTraining, "batch loss became non-finite at step " + std::to_string(step));
    }

    ++adam.t;
    double decay = 1.0;
    if (cfg.schedule == LrSchedule::kCosine) {
      decay = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(cfg.steps)));
    }
    const double lr_w = cfg.lr_weights * decay;
    const double lr_q = cfg.lr_quantparams * decay;
    for (std::size_t l = 0; l < layers; ++l) {
      ToyLayer& layer = student.layers[l];
      auto w = layer.weight.data();
      const auto gw = lg.grads.weight[l].data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        adam.update(w[k], gw[k], m_w[l].data()[k], v_w[l].data()[k], lr_w);
      }
      if (!layer.quant) continue;
      for (std::size_t idx = 0; idx < layer.quant->size(); ++idx) {
        LdpParams& p = (*layer.quant)[idx];
        const QuantParamGrad& g = lg.grads.quant[l][idx];
        std::array<double*, 4> params{&p.beta, &p.gamma, &p.s1, &p.s2};
        const std::array<double, 4> grad{g.beta, g.gamma, cfg.freeze_partitions ? 0.0 : g.s1,
                                         cfg.freeze_partitions ? 0.0 : g.s2};
        const std::size_t active = cfg.freeze_partitions ? 2 : 4;
        for (std::size_t k = 0; k < active; ++k) {
          adam.update(*params[k], grad[k], m_q[l][idx][k], v_q[l][idx][k], lr_q);
          *params[k] = std::clamp(*params[k], -kLogitClamp, kLogitClamp);
        }
      }
    }
  }
  record(cfg.steps);

  report.initial_loss = report.loss.front();
  report.final_loss = report.loss.back();
  for (std::size_t i = 1; i < report.loss.size(); ++i) {
    report.max_loss_spike = std::max(report.max_loss_spike, report.loss[i] - report.loss[i - 1]);
  }

  const MatrixD ts = forward_logits(teacher, eval.inputs);
  const MatrixD ss = forward_logits(student, eval.inputs);
  std::size_t agree = 0;
  for (std::size_t r = 0; r < ts.rows(); ++r) agree += argmax(ts.row(r)) == argmax(ss.row(r)) ? 1 : 0;
  report.agreement = ts.rows() ? static_cast<double>(agree) / static_cast<double>(ts.rows()) : 0.0;

  for (std::size_t l = 0; l < layers; ++l) {
    const ToyLayer& layer = student.layers[l];
    for (std::size_t idx = 0; idx < layer.quant->size(); ++idx) {
      const LdpParams& p = (*layer.quant)[idx];
      report.grids.push_back({l, idx, p, derive_grids(group_span(layer.weight, layer.layout, idx), p)});
    }
  }
  return report;
}

GradCheckProblem make_grad_check_problem(const ToyModelSpec& spec, std::uint64_t seed, std::size_t examples) {
  SeededRng root(seed);
  SeededRng model_rng = root.fork(1);
  SeededRng data_rng = root.fork(2);
  SeededRng param_rng = root.fork(3);
  GradCheckProblem prob;
  const ToyModel teacher = make_teacher(spec, model_rng);
  prob.student = teacher;
  for (auto& layer : prob.student.layers) {
    std::vector<LdpParams> params(layer.layout.total_groups());
    for (auto& p : params) {
      p.beta = logit(param_rng.uniform(0.6, 0.95));
      p.gamma = logit(param_rng.uniform(0.6, 0.95));
      p.s1 = param_rng.uniform(-1.5, 1.5);
      p.s2 = param_rng.uniform(-1.5, 1.5);
    }
    layer.quant = std::move(params);
  }
  prob.inputs = MatrixD(examples, teacher.inputs());
  for (double& v : prob.inputs.data()) v = data_rng.normal();
  prob.teacher_log_probs = log_softmax_rows(forward_logits(teacher, prob.inputs));
  return prob;
}

GradCheckReport grad_check(const ToyModel& student, const MatrixD& x, const MatrixD& teacher_log_probs,
                           double alpha, std::size_t points, std::uint64_t seed, double step) {
  for (const auto& layer : student.layers) {
    if (!layer.quant) fail(ErrorKind::kConfig, "gradient check needs every layer quantized");
  }
  const LossAndGrad analytic = loss_and_grad(student, x, teacher_log_probs, alpha);
  const auto w_hat = dequantized_weights(student);
  SeededRng rng(seed);
  GradCheckReport report;

  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
  auto add = [&](std::size_t l, std::size_t idx, std::string name, double a, double n) {
    const double e = rel(a, n);
    report.max_rel_error = std::max(report.max_rel_error, e);
    report.points.push_back({l, idx, std::move(name), a, n, e});
  };

  std::size_t total_groups = 0;
  for (const auto& layer : student.layers) total_groups += layer.layout.total_groups();
  const std::size_t attempts = std::min(total_groups, points * 4);
  std::size_t checked = 0;
  for (std::size_t attempt = 0; attempt < attempts && checked < points; ++attempt) {
    std::size_t pick = static_cast<std::size_t>(rng.below(total_groups));
    std::size_t l = 0;
    while (pick >= student.layers[l].layout.total_groups()) pick -= student.layers[l++].layout.total_groups();
    const std::size_t idx = pick;
    const ToyLayer& layer = student.layers[l];
    const auto group = group_span(layer.weight, layer.layout, idx);
    const LdpGrids grids = derive_grids(group, (*layer.quant)[idx]);
    double closest = 1.0;
    for (double w : group) closest = std::min(closest, grids.threshold_distance(w));
    if (closest < kThresholdMargin) {
      report.excluded.push_back({l, idx, closest});
      continue;
    }
    ++checked;

    static constexpr std::array<const char*, 4> kNames{"beta", "gamma", "s1", "s2"};
    const QuantParamGrad& g = analytic.grads.quant[l][idx];
    const std::array<double, 4> a{g.beta, g.gamma, g.s1, g.s2};
    for (std::size_t k = 0; k < 4; ++k) {
      ToyModel probe = student;
      LdpParams& p = (*probe.layers[l].quant)[idx];
      std::array<double*, 4> fields{&p.beta, &p.gamma, &p.s1, &p.s2};
      const double base = *fields[k];
      *fields[k] = base + step;
      const double up = distill_loss(probe, x, teacher_log_probs, alpha);
      *fields[k] = base - step;
      const double dn = distill_loss(probe, x, teacher_log_probs, alpha);
      add(l, idx, kNames[k], a[k], (up - dn) / (2.0 * step));
    }

    const std::size_t n = layer.layout.num_groups();
    const std::size_t h = idx / n;
    const std::size_t c = (idx % n) * layer.layout.group_size +
                          static_cast<std::size_t>(rng.below(layer.layout.group_size));
    auto probe_w = w_hat;
    const double base = probe_w[l](h, c);
    auto loss_at = [&](double v) {
      probe_w[l](h, c) = v;
      const MatrixD ls = log_softmax_rows(forward_with(student, probe_w, x, nullptr));
      double total = 0.0;
      for (std::size_t r = 0; r < ls.rows(); ++r) total += row_loss(ls.row(r), teacher_log_probs.row(r), alpha);
      return total / static_cast<double>(ls.rows());
    };
    const double num = (loss_at(base + step) - loss_at(base - step)) / (2.0 * step);
    add(l, idx, "w_hat[" + std::to_string(h) + "," + std::to_string(c) + "]", analytic.grads.dequantized[l](h, c), num);
  }
  return report;
}

InvarianceReport invariance_check(const ToyModelSpec& spec, std::uint64_t model_seed,
                                  std::optional<std::uint64_t> rotation_seed, std::size_t tokens) {
  SeededRng root(model_seed);
  SeededRng model_rng = root.fork(1);
  SeededRng data_rng = root.fork(2);
  const ToyModel model = make_teacher(spec, model_rng);
  MatrixD x(tokens, model.inputs());
  for (double& v : x.data()) v = data_rng.normal();
  const MatrixD ref = forward_logits(model, x);

  InvarianceReport report;
  const GroupLayout& first = model.layers.front().layout;
  report.kurt_before = groupwise_kurtosis(model.layers.front().weight, first).mean();
  if (!rotation_seed) {
    report.kurt_after = report.kurt_before;
    return report;
  }

  SeededRng rot_rng(*rotation_seed);
  ToyModel rotated = model;
  const std::size_t layers = model.layers.size();
  // Boundary b sits in front of layer b; boundary `layers` is the output.
  std::vector<std::optional<HadamardMatrix>> boundary(layers + 1);
  auto make = [&](std::size_t b, std::size_t n) {
    SeededRng r = rot_rng.fork(b);
    boundary[b] = randomized_hadamard(n, r);
    ++report.rotations_fused;
  };
  make(0, model.inputs());
  if (model.nonlinearity == Nonlinearity::kIdentity) {
    for (std::size_t b = 1; b < layers; ++b) make(b, model.layers[b].weight.cols());
  }
  if (is_power_of_two(model.classes())) make(layers, model.classes());

  for (std::size_t l = 0; l < layers; ++l) {
    rotated.layers[l].weight = fuse(model.layers[l].weight, boundary[l + 1], boundary[l]);
  }
  MatrixD out = forward_logits(rotated, apply_online(x, *boundary[0]));
  if (boundary[layers]) out = apply_online(out, boundary[layers]->transposed());

  report.max_rel_deviation = normwise_deviation(ref, out);
  report.kurt_after = groupwise_kurtosis(rotated.layers.front().weight, first).mean();
  report.kurt_delta = report.kurt_after - report.kurt_before;
  return report;
}

}  // namespace rcp
