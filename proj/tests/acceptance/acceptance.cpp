// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one line per criterion, exit status 1 if any hard
// criterion fails. The throughput criterion is soft and only warns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "rcp/calib.hpp"
#include "rcp/gemv.hpp"
#include "rcp/half.hpp"
#include "rcp/ldp.hpp"
#include "rcp/nf3.hpp"
#include "rcp/pack.hpp"
#include "rcp/qat.hpp"
#include "rcp/rcpq.hpp"
#include "rcp/rotation.hpp"
#include "rcp/stats.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool soft = false;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

rcp::MatrixD gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  rcp::SeededRng rng(seed);
  rcp::MatrixD m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// ---------------------------------------------------------------- 1

Outcome hadamard_orthogonality() {
  double worst = 0;
  for (std::size_t n = 2; n <= 1024; n *= 2) worst = std::max(worst, rcp::orthogonality_error(rcp::hadamard(n)));
  return {worst < 1e-6, fmt("max |HH^T - I| = %.3g over n = 2..1024", worst)};
}

// ---------------------------------------------------------------- 2

Outcome kurtosis_law() {
  bool ok = true;
  std::string detail;
  struct Case {
    rcp::Distribution d;
    double tol;
  };
  const Case cases[] = {{rcp::Distribution::kUniform, 0.02},
                        {rcp::Distribution::kRademacher, 0.01},
                        {rcp::Distribution::kGaussian, 0.02}};
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    double worst = 0;
    for (std::size_t n : {16u, 64u, 256u}) {
      rcp::SeededRng rng(seed++);
      const auto r = rcp::lemma1_mc(c.d, n, 100000, rng);
      worst = std::max(worst, std::abs(r.kurt_after - r.expected_after));
    }
    ok &= worst <= c.tol;
    detail += fmt("%s%s max dev %.4f (tol %.2f)", detail.empty() ? "" : "; ", std::string(rcp::to_string(c.d)).c_str(),
                  worst, c.tol);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 3

Outcome invariance() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    rcp::ToyModelSpec spec;
    if (seed % 2) {
      spec.nonlinearity = rcp::Nonlinearity::kIdentity;
      spec.widths = {64, 64, 64, 16};
    }
    worst = std::max(worst, rcp::invariance_check(spec, seed, 1000 + seed).max_rel_deviation);
  }
  return {worst <= 1e-9, fmt("max relative deviation %.3g over 20 seeds", worst)};
}

// ---------------------------------------------------------------- 4

Outcome qerr_correlation() {
  // One group per output channel; rows alternate between platykurtic and
  // leptokurtic families at random scales.
  const std::size_t rows = 256, cols = 128, tokens = 64;
  rcp::SeededRng rng(4);
  rcp::MatrixD w(rows, cols);
  for (std::size_t h = 0; h < rows; ++h) {
    const double scale = std::exp(rng.uniform(-1, 1));
    const int family = static_cast<int>(rng.below(4));
    for (std::size_t c = 0; c < cols; ++c) {
      double v;
      switch (family) {
        case 0: v = rng.uniform(-1, 1); break;
        case 1: v = std::sin(std::numbers::pi * (rng.uniform01() - 0.5)); break;
        case 2: {
          const double u = rng.uniform01() - 0.5;
          v = (u < 0 ? 1 : -1) * std::log(1 - 2 * std::abs(u));
          break;
        }
        default: v = rng.normal() * (rng.uniform01() < 0.05 ? 6.0 : 1.0); break;
      }
      w(h, c) = scale * v;
    }
  }
  const auto x = gaussian(tokens, cols, 5);
  rcp::SeededRng rot_rng(6);
  const auto r = rcp::randomized_hadamard(cols, rot_rng);
  rcp::WeightQuantizer quant = [](const rcp::MatrixD& wq, const rcp::MatrixD& xq, const rcp::GroupLayout& l) {
    rcp::ClipSearchConfig cfg;
    cfg.grid_points = 16;
    auto q = rcp::clipped_uniform_fake_quant(wq, xq, l, cfg);
    return rcp::FakeQuantOutput{std::move(q.clipped), std::move(q.dequantized)};
  };
  const auto rep = rcp::qerr_vs_kurt(w, x, &r, quant, rcp::GroupLayout(rows, cols, cols));
  return {rep.spearman > 0.3, fmt("spearman %.3f over %zu groups", rep.spearman, rows)};
}

// ---------------------------------------------------------------- 5

Outcome grid_algebra() {
  rcp::SeededRng rng(5);
  std::size_t bad = 0;
  double worst_sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const rcp::LdpParams p{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-15, 15), rng.uniform(-15, 15)};
    const double mn = -rng.uniform(0.01, 5), mx = rng.uniform(0.01, 5);
    const auto g = rcp::derive_grids(mn, mx, p);
    const double sum_err = std::abs(g.p[0] + g.p[1] + g.p[2] - 1.0);
    worst_sum = std::max(worst_sum, sum_err);
    const bool ordered = 0 < g.t[0] && g.t[0] < g.t[1] && g.t[1] < g.t[2] && g.t[2] < 1 && g.w[0] < g.w[1] &&
                         g.w[1] < g.w[2] && g.w[2] < g.w[3];
    const bool ends = g.w[0] == 0.0 && g.w[3] == 1.0 &&
                      std::abs(g.lo + g.h - g.hi) <= 0x1p-52 * std::max(std::abs(g.lo), std::abs(g.hi));
    if (sum_err > 1e-12 || !ordered || !ends) ++bad;
  }
  return {bad == 0, fmt("%zu violations in 1e5 draws, max simplex error %.2g", bad, worst_sum)};
}

// ---------------------------------------------------------------- 6

Outcome gradient_fidelity() {
  // Quantizer level: ldp::grads against central differences of fake_quant.
  rcp::SeededRng rng(6);
  double worst_ldp = 0;
  int checked = 0;
  while (checked < 100) {
    std::vector<double> grp(14);
    for (double& v : grp) v = rng.normal();
    const rcp::LdpParams p{rng.uniform(0.5, 3), rng.uniform(0.5, 3), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<double> up(grp.size());
    for (double& v : up) v = rng.normal();
    const auto grids = rcp::derive_grids(grp, p);
    bool near = false;
    for (double v : grp) near |= grids.threshold_distance(v) < rcp::kThresholdMargin;
    if (near) continue;
    ++checked;
    auto f = [&](const rcp::LdpParams& q) {
      const auto fq = rcp::fake_quant(grp, q);
      double s = 0;
      for (std::size_t i = 0; i < grp.size(); ++i) s += up[i] * fq.w_hat[i];
      return s;
    };
    const auto g = rcp::grads(grp, p, up);
    const double analytic[] = {g.d_beta, g.d_gamma, g.d_s1, g.d_s2};
    for (int k = 0; k < 4; ++k) {
      rcp::LdpParams a = p, b = p;
      double* pa[] = {&a.beta, &a.gamma, &a.s1, &a.s2};
      double* pb[] = {&b.beta, &b.gamma, &b.s1, &b.s2};
      *pa[k] += 1e-4;
      *pb[k] -= 1e-4;
      const double num = (f(a) - f(b)) / 2e-4;
      worst_ldp = std::max(worst_ldp, std::abs(analytic[k] - num) / std::max({std::abs(analytic[k]), std::abs(num), 1e-6}));
    }
  }
  // Loss level: the distillation loss through every fake quantizer.
  const auto prob = rcp::make_grad_check_problem({}, 0);
  const auto rep = rcp::grad_check(prob.student, prob.inputs, prob.teacher_log_probs, prob.alpha, 100, 1);
  const bool ok = worst_ldp <= 1e-4 && rep.max_rel_error <= 1e-4 && rep.points.size() >= 400;
  return {ok, fmt("quantizer max rel err %.2g (100 points); loss max rel err %.2g (%zu checks, %zu excluded)", worst_ldp,
                  rep.max_rel_error, rep.points.size(), rep.excluded.size())};
}

// ---------------------------------------------------------------- 7

Outcome packing() {
  std::size_t mismatches = 0;
  for (unsigned b = 0; b < 256; ++b) {
    const rcp::PackedWeights pw{1, 4, {static_cast<std::uint8_t>(b)}};
    const auto codes = rcp::unpack_weight_codes(pw);
    mismatches += rcp::pack_weight_codes(codes, rcp::GroupLayout(1, 4, 4)) != pw;
    const rcp::PackedActivations pa{2, {static_cast<std::int8_t>(static_cast<std::uint8_t>(b))}};
    mismatches += rcp::pack_activation_codes(rcp::unpack_activation_codes(pa)) != pa;
  }
  return {mismatches == 0, fmt("%zu mismatches over 256 weight and 256 activation bytes", mismatches)};
}

// ---------------------------------------------------------------- 8, 9

struct GemvProblem {
  rcp::GroupLayout layout;
  rcp::PackedActivations x;
  float scale = 1;
  rcp::PackedWeights w;
  rcp::DequantLut lut;
  rcp::GemvTask task() const { return {x, scale, w, lut, layout}; }
};

GemvProblem random_gemv(std::size_t h, std::size_t c, std::size_t g, std::uint64_t seed) {
  rcp::SeededRng rng(seed);
  GemvProblem p;
  p.layout = rcp::GroupLayout(h, c, g);
  std::vector<std::int8_t> xc(c);
  for (auto& v : xc) v = static_cast<std::int8_t>(static_cast<int>(rng.below(16)) - 8);
  p.x = rcp::pack_activation_codes(xc);
  p.scale = static_cast<float>(rng.uniform(0.01, 1));
  rcp::CodeMatrix codes{h, c, std::vector<std::uint8_t>(h * c)};
  for (auto& v : codes.codes) v = static_cast<std::uint8_t>(rng.below(4));
  p.w = rcp::pack_weight_codes(codes, p.layout);
  p.lut = rcp::DequantLut{h, p.layout.num_groups(), std::vector<std::uint16_t>(h * p.layout.num_groups() * 4)};
  for (std::size_t i = 0; i < h * p.layout.num_groups(); ++i) {
    double v = -rng.uniform(0.05, 1);
    for (int k = 0; k < 4; ++k, v += rng.uniform(0.02, 0.7)) p.lut.entries[i * 4 + k] = rcp::float_to_half(static_cast<float>(v));
  }
  return p;
}

Outcome gemv_equivalence() {
  double worst = 0;
  bool deterministic = true;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    rcp::SeededRng shape(seed);
    const std::size_t g = std::size_t{32} << shape.below(3);
    const std::size_t c = g * (1 + shape.below(1024 / g));
    const std::size_t h = 1 + shape.below(1024);
    const std::size_t bh = std::size_t{2} << shape.below(5);
    const auto p = random_gemv(h, c, g, 10000 + seed);
    const auto fast = rcp::gemv_fast(p.task(), bh);
    worst = std::max(worst, rcp::normwise_relative_error(fast, rcp::dense_oracle(p.task())));
    if (seed % 50 == 0) deterministic &= rcp::gemv_fast(p.task(), bh) == fast && rcp::gemv_fast(p.task(), bh, 4) == fast;
  }
  return {worst <= 1e-5 && deterministic,
          fmt("max normwise rel err %.3g over 1000 tasks; repeated runs %s", worst, deterministic ? "bit-identical" : "differ")};
}

template <typename F>
double best_ns(F&& f, int reps) {
  double best = INFINITY;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::nano>(Clock::now() - t0).count());
  }
  return best;
}

Outcome gemv_throughput() {
  const auto p = random_gemv(4096, 4096, 128, 9);
  volatile float sink = 0;
  const double ref = best_ns([&] { sink = sink + rcp::gemv_ref(p.task())[0]; }, 5);
  const double fast = best_ns([&] { sink = sink + rcp::gemv_fast(p.task(), 8, 1)[0]; }, 5);
  const double ratio = ref / fast;
  Outcome o{ratio >= 2.0, fmt("gemv_ref %.2f ms, gemv_fast %.2f ms, speedup %.2fx (target 2x)", ref / 1e6, fast / 1e6, ratio)};
  o.soft = true;
  return o;
}

// ---------------------------------------------------------------- 10

Outcome compression() {
  const rcp::GroupLayout layout(4096, 4096, 128);
  rcp::RcpqModel m;
  m.layout = layout;
  m.weights = rcp::PackedWeights{4096, 4096, std::vector<std::uint8_t>(4096 * 4096 / 4)};
  m.lut = rcp::DequantLut{4096, 32, std::vector<std::uint16_t>(4096 * 32 * 4)};
  const auto bytes = rcp::serialize_rcpq(m);
  const auto sections = rcp::rcpq_sections(bytes);
  const auto sizes = rcp::payload_sizes(layout);
  const bool ok = sections.size() == 2 && sections[0].length == 4'194'304 && sections[1].length == 1'048'576 &&
                  sizes.weight_bytes == 4'194'304 && sizes.lut_bytes == 1'048'576 && sizes.bits_per_weight == 2.5 &&
                  sizes.compression_vs_fp16 == 6.4;
  return {ok, fmt("weights %llu B, LUT %llu B, %.2f bits/weight, %.2fx vs binary16",
                  static_cast<unsigned long long>(sections[0].length),
                  static_cast<unsigned long long>(sections[1].length), sizes.bits_per_weight, sizes.compression_vs_fp16)};
}

// ---------------------------------------------------------------- 11

Outcome grid_search() {
  std::size_t not_better = 0, not_strict = 0;
  rcp::ClipSearchConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = gaussian(4, 256, 300 + seed);
    const auto x = gaussian(64, 256, 400 + seed);
    const auto res = rcp::grid_search_clip(w, x, rcp::GroupLayout(4, 256, 128), cfg);
    for (const auto& c : res.groups) not_better += c.objective > c.unclipped_objective;

    rcp::SeededRng rng(500 + seed);
    rcp::MatrixD wo(1, 128);
    double ss = 0;
    for (double& v : wo.data()) {
      v = 0.1 * rng.normal();
      ss += v * v;
    }
    wo(0, rng.below(128)) = 10.0 * std::sqrt(ss / 128);
    const auto ro = rcp::grid_search_clip(wo, gaussian(64, 128, 600 + seed), rcp::GroupLayout(1, 128, 128), cfg);
    not_strict += !(ro.groups[0].objective < ro.groups[0].unclipped_objective && ro.groups[0].hi_fraction < 1.0);
  }
  return {not_better == 0 && not_strict == 0,
          fmt("%zu groups worse than no-clip; %zu of 20 outlier seeds without strict gain", not_better, not_strict)};
}

// ---------------------------------------------------------------- 12

Outcome toy_qat() {
  const rcp::MatrixD pt(1, 2, std::vector<double>{0.5, 0.5});
  const rcp::MatrixD ps(1, 2, std::vector<double>{0.25, 0.75});
  const double spot = rcp::cakld(pt, ps, 0.5);
  const bool spot_ok = std::abs(spot - 0.13733) <= 1e-4;

  std::size_t halved = 0, ldp_wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    rcp::DistillConfig cfg;
    cfg.seed = seed;
    const auto full = rcp::train_toy(cfg);
    cfg.freeze_partitions = true;
    const auto frozen = rcp::train_toy(cfg);
    halved += full.final_loss <= 0.5 * full.initial_loss;
    ldp_wins += full.final_loss <= frozen.final_loss;
    per_seed += fmt(" %llu:%.4f/%.4f/%.4f", static_cast<unsigned long long>(seed), full.initial_loss, full.final_loss,
                    frozen.final_loss);
  }
  const bool ok = spot_ok && halved == 5 && ldp_wins >= 4;
  return {ok, fmt("cakld spot %.5f; loss halved on %zu/5; learned <= frozen on %zu/5 (need 4); seed:init/ldp/frozen%s", spot,
                  halved, ldp_wins, per_seed.c_str())};
}

// ---------------------------------------------------------------- 13

Outcome nf3() {
  bool ok = true;
  rcp::SeededRng rng(13);
  double worst_ratio = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double mn = -rng.uniform(0.2, 3), mx = rng.uniform(0.2, 3);
    const rcp::Nf3Params p{rng.uniform(0.5, 4), rng.uniform(0.5, 4), rng.uniform(-1.5, 1.5)};
    const auto grid = trial % 2 ? rcp::Nf3Grid::normal_float() : rcp::Nf3Grid::uniform();
    const auto s = rcp::derive_nf3_scales(mn, mx, p);
    std::vector<double> scan(10000);
    for (std::size_t i = 0; i < scan.size(); ++i) scan[i] = mn + (mx - mn) * static_cast<double>(i) / 9999.0;
    scan.front() = mn;
    scan.back() = mx;
    scan.push_back(s.center);
    const auto fq = rcp::nf3_fake_quant(scan, p, grid);
    ok &= fq.w_hat.back() == s.center && fq.codes.back() == 0;
    ok &= fq.w_hat.front() == s.lo && fq.w_hat[9999] == s.hi;
    std::vector<double> levels;
    for (int c = -static_cast<int>(grid.negative.size()) + 1; c < static_cast<int>(grid.positive.size()); ++c) {
      levels.push_back(rcp::nf3_dequant(static_cast<std::int8_t>(c), s, grid));
    }
    for (std::size_t i = 0; i < scan.size(); ++i) {
      const double v = std::clamp(scan[i], s.lo, s.hi);
      auto it = std::upper_bound(levels.begin(), levels.end(), v);
      const double above = it == levels.end() ? levels.back() : *it;
      const double below = it == levels.begin() ? levels.front() : *(it - 1);
      const double gap = above - below;
      const double err = std::abs(v - fq.w_hat[i]);
      if (gap > 0) worst_ratio = std::max(worst_ratio, err / gap);
      else ok &= err == 0.0;
    }
  }
  ok &= worst_ratio <= 0.5 + 1e-12;
  return {ok, fmt("center and endpoints exact; worst error / local gap %.4f over 20 x 1e4 scans", worst_ratio)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "hadamard orthogonality", 1, hadamard_orthogonality},
      {2, "rotated kurtosis law", 30, kurtosis_law},
      {3, "computational invariance", 5, invariance},
      {4, "qerr vs kurtosis correlation", 60, qerr_correlation},
      {5, "partition grid algebra", 10, grid_algebra},
      {6, "gradient fidelity", 10, gradient_fidelity},
      {7, "packing exactness", 1, packing},
      {8, "gemv equivalence", 60, gemv_equivalence},
      {9, "gemv throughput", 0, gemv_throughput},
      {10, "compression arithmetic", 0, compression},
      {11, "clip grid search", 30, grid_search},
      {12, "toy distillation", 300, toy_qat},
      {13, "nf3 fixed points and gaps", 5, nf3},
  };
  int hard_failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = c.time_limit_s == 0 || secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    const char* tag = pass ? "PASS" : (o.soft ? "WARN" : "FAIL");
    if (!pass && !o.soft) ++hard_failures;
    std::string timing = fmt("%.2fs", secs);
    if (c.time_limit_s > 0) timing += fmt(" / limit %.0fs", c.time_limit_s);
    std::printf("[%s] %2d %-30s %s (%s)\n", tag, c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d hard failure(s)\n", hard_failures);
  return hard_failures == 0 ? 0 : 1;
}
