// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "rcp/calib.hpp"
#include "rcp/error.hpp"
#include "rcp/gemv.hpp"
#include "rcp/half.hpp"
#include "rcp/layout.hpp"
#include "rcp/npy.hpp"
#include "rcp/pack.hpp"
#include "rcp/parallel.hpp"
#include "rcp/qat.hpp"
#include "rcp/rcpq.hpp"
#include "rcp/rotation.hpp"
#include "rcp/stats.hpp"
#include "rcp/uniform_quant.hpp"

#ifndef RCP_VERSION
#define RCP_VERSION "0.0.0"
#endif

namespace rcp::cli {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Verification failures carry their own exit path; everything else is an Error.
struct VerifyFailure {
  std::string message;
  json detail;
};

json envelope(const std::string& command, json config) {
  return json{{"tool", "rcp"}, {"version", version()}, {"command", command}, {"config", std::move(config)}};
}

void write_json(const json& report, const std::string& path) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  f << report.dump(2) << '\n';
  if (!f) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

json kurtosis_json(const KurtosisReport& k) {
  return json{{"mean", k.mean()}, {"platykurtic_fraction", k.platykurtic_fraction}, {"channel_mean", k.channel_mean()}};
}

json params_json(const LdpParams& p) {
  return json{{"beta", p.beta}, {"gamma", p.gamma}, {"s1", p.s1}, {"s2", p.s2}};
}

std::optional<HadamardMatrix> rotation_for(std::optional<std::uint64_t> seed, std::size_t n) {
  if (!seed) return std::nullopt;
  SeededRng rng(*seed);
  return randomized_hadamard(n, rng);
}

FakeQuantOutput clipped_quantizer(const MatrixD& w, const MatrixD& x, const GroupLayout& layout, int bits) {
  ClipSearchConfig cfg;
  cfg.bits = bits;
  auto q = clipped_uniform_fake_quant(w, x, layout, cfg);
  return {std::move(q.clipped), std::move(q.dequantized)};
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string weights, acts, json_path;
  std::size_t group = 128;
  std::optional<std::uint64_t> rotate;
  std::size_t tokens = 512;
  int bits = 2;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const MatrixD w = to_double(load_npy(a.weights));
  const GroupLayout layout(w.rows(), w.cols(), a.group);
  const auto rot = rotation_for(a.rotate, w.cols());

  json config{{"weights", a.weights}, {"group", a.group}, {"rotate", a.rotate ? json(*a.rotate) : json(nullptr)},
              {"acts", a.acts.empty() ? json(nullptr) : json(a.acts)}, {"tokens", a.tokens}, {"bits", a.bits}};
  json report = envelope("stats", config);

  const KurtosisReport base = groupwise_kurtosis(w, layout);
  report["result"]["kurtosis"] = kurtosis_json(base);
  out << "weights " << w.rows() << "x" << w.cols() << ", " << layout.total_groups() << " groups of " << a.group
      << "\n  mean excess kurtosis " << base.mean() << ", platykurtic fraction " << base.platykurtic_fraction << "\n";
  if (rot) {
    const KurtosisReport after = groupwise_kurtosis(fuse(w, nullptr, &*rot), layout);
    report["result"]["kurtosis_rotated"] = kurtosis_json(after);
    out << "  after rotation: mean " << after.mean() << ", platykurtic fraction " << after.platykurtic_fraction
        << "\n";
  }
  if (!a.acts.empty()) {
    MatrixD x = to_double(load_npy(a.acts));
    if (x.rows() > a.tokens) {
      MatrixD head(a.tokens, x.cols());
      std::copy(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(head.size()), head.data().begin());
      x = std::move(head);
    }
    const int bits = a.bits;
    const QErrReport q =
        qerr_vs_kurt(w, x, rot ? &*rot : nullptr,
                     [bits](const MatrixD& ww, const MatrixD& xx, const GroupLayout& l) {
                       return clipped_quantizer(ww, xx, l, bits);
                     },
                     layout);
    report["result"]["qerr"] = {{"tokens", q.tokens},         {"qerr_before", q.qerr_before},
                                {"qerr_after", q.qerr_after}, {"delta_kurt", q.delta_kurt},
                                {"delta_qerr", q.delta_qerr}, {"spearman", q.spearman}};
    out << "  qerr vs kurtosis over " << q.tokens << " tokens: spearman " << q.spearman << "\n";
  }
  report["timing"]["seconds"] = seconds_since(t0);
  write_json(report, a.json_path);
  return kExitOk;
}

// ---------------------------------------------------------------- lemma1

struct Lemma1Args {
  std::string dist = "uniform", json_path;
  std::size_t n = 64;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  double shift = 0.0;
};

int cmd_lemma1(const Lemma1Args& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const Distribution d = parse_distribution(a.dist);
  SeededRng rng(a.seed);
  const Lemma1Report r = lemma1_mc(d, a.n, a.trials, rng, a.shift);
  json report = envelope("lemma1", {{"dist", std::string(to_string(d))},
                                    {"n", a.n},
                                    {"trials", a.trials},
                                    {"seed", a.seed},
                                    {"shift", a.shift}});
  report["result"] = {{"kurt_before", r.kurt_before},     {"kurt_after", r.kurt_after},
                      {"expected_after", r.expected_after}, {"mean_first", r.mean_first},
                      {"mean_rest", r.mean_rest},           {"var_before", r.var_before},
                      {"var_after_min", r.var_after_min},   {"var_after_max", r.var_after_max}};
  report["timing"]["seconds"] = seconds_since(t0);
  out << to_string(d) << " n=" << a.n << " trials=" << a.trials << "\n  kurt before " << r.kurt_before
      << ", after " << r.kurt_after << " (Kurt(X)/n = " << r.expected_after << ")\n";
  write_json(report, a.json_path);
  return kExitOk;
}

// ---------------------------------------------------------------- quantize

struct QuantizeArgs {
  std::string weights, calib, out_path, scheme = "ldp", json_path;
  int bits = 2;
  std::size_t group = 128;
  std::size_t grid_points = 64;
  std::optional<std::uint64_t> rotate;
};

// The container stores parameters as binary32; quantizing from the narrowed
// values keeps codes and LUT reproducible from the file alone.
std::vector<LdpParams> narrow(std::vector<LdpParams> params) {
  for (auto& p : params) {
    p.beta = static_cast<float>(p.beta);
    p.gamma = static_cast<float>(p.gamma);
    p.s1 = static_cast<float>(p.s1);
    p.s2 = static_cast<float>(p.s2);
  }
  return params;
}

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
  if (a.bits != 2) fail(ErrorKind::kConfig, "only --bits 2 is supported by the ldp scheme");
  if (a.scheme != "ldp") fail(ErrorKind::kConfig, "unknown scheme '" + a.scheme + "'");
  const auto t0 = Clock::now();
  MatrixD w = to_double(load_npy(a.weights));
  MatrixD x = to_double(load_npy(a.calib));
  const GroupLayout layout(w.rows(), w.cols(), a.group);
  if (x.cols() != w.cols()) fail(ErrorKind::kShape, "calibration width does not match weights");
  if (const auto rot = rotation_for(a.rotate, w.cols())) {
    w = fuse(w, nullptr, &*rot);
    x = apply_online(x, *rot);
  }

  ClipSearchConfig cfg;
  cfg.grid_points = a.grid_points;
  const ClipSearchResult clip = grid_search_clip(w, x, layout, cfg);
  const std::vector<LdpParams> params = narrow(ldp_init(layout, clip));
  const LdpQuantized q = quantize_ldp(w, layout, params);
  RcpqModel model{layout, pack_weight_codes(q.codes, layout), q.lut, params};
  write_rcpq(model, a.out_path);

  double obj = 0.0, unclipped = 0.0;
  for (const auto& c : clip.groups) {
    obj += c.objective;
    unclipped += c.unclipped_objective;
  }
  const PayloadSizes sizes = payload_sizes(layout);
  json report = envelope("quantize", {{"weights", a.weights},
                                      {"calib", a.calib},
                                      {"bits", a.bits},
                                      {"scheme", a.scheme},
                                      {"group", a.group},
                                      {"grid_points", a.grid_points},
                                      {"rotate", a.rotate ? json(*a.rotate) : json(nullptr)},
                                      {"out", a.out_path}});
  report["result"] = {{"groups", layout.total_groups()},
                      {"clip_objective", obj},
                      {"unclipped_objective", unclipped},
                      {"warnings", clip.warnings},
                      {"weight_bytes", sizes.weight_bytes},
                      {"lut_bytes", sizes.lut_bytes},
                      {"bits_per_weight", sizes.bits_per_weight},
                      {"compression_vs_fp16", sizes.compression_vs_fp16}};
  report["timing"]["seconds"] = seconds_since(t0);
  out << "quantized " << w.rows() << "x" << w.cols() << " into " << a.out_path << "\n  clip objective " << obj
      << " (unclipped " << unclipped << "), " << sizes.bits_per_weight << " bits/weight, "
      << clip.warnings.size() << " warnings\n";
  for (const auto& msg : clip.warnings) out << "  warning: " << msg << "\n";
  write_json(report, a.json_path);
  return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string model, against, acts, json_path;
  std::optional<std::uint64_t> rotate;
  std::size_t tokens = 4;
  double tolerance = 1e-5;
  std::size_t tile_rows = 8;
};

void verify_codes(const RcpqModel& model, const MatrixD& w, json& result) {
  const GroupLayout& layout = model.layout;
  if (!model.params) {
    result["codes_checked"] = false;
    return;
  }
  const LdpQuantized q = quantize_ldp(w, layout, *model.params);
  const CodeMatrix stored = unpack_weight_codes(model.weights);
  const std::size_t n = layout.num_groups();
  const std::size_t gs = layout.group_size;
  for (std::size_t h = 0; h < layout.out_channels; ++h) {
    for (std::size_t g = 0; g < n; ++g) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (model.lut.bits(h, g, i) != q.lut.bits(h, g, i)) {
          throw VerifyFailure{"LUT entry mismatch",
                              {{"h", h}, {"g", g}, {"entry", i}, {"stored", model.lut.at(h, g, i)},
                               {"expected", q.lut.at(h, g, i)}}};
        }
      }
      for (std::size_t c = g * gs; c < (g + 1) * gs; ++c) {
        const std::size_t k = h * layout.in_channels + c;
        if (stored.codes[k] != q.codes.codes[k]) {
          throw VerifyFailure{"weight code mismatch", {{"h", h}, {"g", g}, {"c", c}, {"stored", stored.codes[k]},
                                                       {"expected", q.codes.codes[k]}}};
        }
      }
    }
  }
  result["codes_checked"] = true;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  json report = envelope("verify", {{"model", a.model},
                                    {"against", a.against},
                                    {"acts", a.acts},
                                    {"rotate", a.rotate ? json(*a.rotate) : json(nullptr)},
                                    {"tokens", a.tokens},
                                    {"tolerance", a.tolerance},
                                    {"bh", a.tile_rows}});
  json& result = report["result"];
  int code = kExitOk;
  try {
    const RcpqModel model = read_rcpq(a.model);
    const GroupLayout& layout = model.layout;
    MatrixD w = to_double(load_npy(a.against));
    Matrix x = load_npy(a.acts);
    if (w.rows() != layout.out_channels || w.cols() != layout.in_channels) {
      throw VerifyFailure{"weight shape does not match the container", {{"rows", w.rows()}, {"cols", w.cols()}}};
    }
    if (x.cols() != layout.in_channels) {
      throw VerifyFailure{"activation width does not match the container", {{"cols", x.cols()}}};
    }
    if (const auto rot = rotation_for(a.rotate, w.cols())) {
      w = fuse(w, nullptr, &*rot);
      x = apply_online(x, *rot);
    }
    verify_codes(model, w, result);

    const QuantizedActivation act = quant_act_per_token(x, ActQuantConfig{.zero_token_fallback = true});
    const std::size_t tokens = std::min(a.tokens, act.tokens);
    double worst_ref = 0.0, worst_fast = 0.0;
    for (std::size_t t = 0; t < tokens; ++t) {
      const std::span<const std::int8_t> row(act.codes.data() + t * act.channels, act.channels);
      const PackedActivations px = pack_activation_codes(row);
      const GemvTask task{px, act.scale[t], model.weights, model.lut, layout};
      const auto oracle = dense_oracle(task);
      const auto ref = gemv_ref(task);
      const auto fast = gemv_fast(task, a.tile_rows, worker_count());
      const double e_ref = normwise_relative_error(ref, oracle);
      const double e_fast = normwise_relative_error(fast, oracle);
      worst_ref = std::max(worst_ref, e_ref);
      worst_fast = std::max(worst_fast, e_fast);
      if (e_ref > a.tolerance || e_fast > a.tolerance) {
        std::size_t h_bad = 0;
        double d_bad = -1.0;
        const auto& got = e_fast > e_ref ? fast : ref;
        for (std::size_t h = 0; h < got.size(); ++h) {
          const double d = std::abs(static_cast<double>(got[h]) - oracle[h]);
          if (d > d_bad) {
            d_bad = d;
            h_bad = h;
          }
        }
        throw VerifyFailure{"GEMV exceeds tolerance",
                            {{"token", t}, {"h", h_bad}, {"gemv_ref_error", e_ref}, {"gemv_fast_error", e_fast}}};
      }
    }
    result["tokens_checked"] = tokens;
    result["gemv_ref_error"] = worst_ref;
    result["gemv_fast_error"] = worst_fast;
    result["ok"] = true;
    out << "verify ok: " << (result["codes_checked"].get<bool>() ? "codes and LUT reproduced, " : "")
        << "gemv error ref " << worst_ref << ", fast " << worst_fast << " over " << tokens << " tokens\n";
  } catch (const VerifyFailure& f) {
    result["ok"] = false;
    result["failure"] = f.message;
    result["location"] = f.detail;
    out << "verify FAILED: " << f.message << " " << f.detail.dump() << "\n";
    code = kExitFailure;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    result["ok"] = false;
    result["failure"] = e.what();
    out << "verify FAILED: " << e.what() << "\n";
    code = kExitFailure;
  }
  report["timing"]["seconds"] = seconds_since(t0);
  write_json(report, a.json_path);
  return code;
}

// ---------------------------------------------------------------- gemv-bench

struct BenchArgs {
  std::string model, json_path;
  std::size_t iters = 1000;
  std::size_t tile_rows = 8;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: RCP_THREADS or hardware
};

template <typename F>
double ns_per_iter(std::size_t iters, F&& f) {
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < iters; ++i) f();
  return std::chrono::duration<double, std::nano>(Clock::now() - t0).count() / static_cast<double>(iters);
}

int cmd_gemv_bench(const BenchArgs& a, std::ostream& out) {
  if (a.iters == 0) fail(ErrorKind::kConfig, "--iters must be positive");
  const RcpqModel model = read_rcpq(a.model);
  const std::size_t threads = a.threads ? a.threads : worker_count();
  SeededRng rng(a.seed);
  std::vector<std::int8_t> codes(model.layout.in_channels);
  for (auto& c : codes) c = static_cast<std::int8_t>(static_cast<int>(rng.below(16)) - 8);
  const PackedActivations px = pack_activation_codes(codes);
  const GemvTask task{px, 0.05f, model.weights, model.lut, model.layout};

  volatile float sink = 0.0f;
  const double ref_ns = ns_per_iter(a.iters, [&] { sink = sink + gemv_ref(task)[0]; });
  const double fast_ns = ns_per_iter(a.iters, [&] { sink = sink + gemv_fast(task, a.tile_rows, threads)[0]; });
  const double err = normwise_relative_error(gemv_fast(task, a.tile_rows, threads), dense_oracle(task));

  json report = envelope("gemv-bench", {{"model", a.model},
                                        {"iters", a.iters},
                                        {"bh", a.tile_rows},
                                        {"seed", a.seed},
                                        {"threads", threads}});
  report["result"] = {{"H", model.layout.out_channels},
                      {"C", model.layout.in_channels},
                      {"G", model.layout.group_size},
                      {"fast_relative_error", err}};
  report["timing"] = {{"gemv_ref_ns", ref_ns}, {"gemv_fast_ns", fast_ns}, {"speedup", ref_ns / fast_ns}};
  out << "gemv " << model.layout.out_channels << "x" << model.layout.in_channels << " G=" << model.layout.group_size
      << ": ref " << ref_ns / 1e3 << " us, fast " << fast_ns / 1e3 << " us (BH=" << a.tile_rows << ", " << threads
      << " threads), speedup " << ref_ns / fast_ns << "x\n";
  write_json(report, a.json_path);
  return kExitOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  DistillConfig cfg;
  std::optional<double> alpha;
  std::string confidence = "label";
  std::string schedule = "constant";
  bool no_rotate = false;
  std::string json_path;
};

int cmd_train_toy(TrainArgs a, std::ostream& out) {
  DistillConfig& cfg = a.cfg;
  cfg.alpha = a.alpha;
  cfg.rotate = !a.no_rotate;
  if (a.confidence == "label") {
    cfg.confidence = ConfidenceMode::kLabelProbability;
  } else if (a.confidence == "top") {
    cfg.confidence = ConfidenceMode::kTopProbability;
  } else {
    fail(ErrorKind::kConfig, "--confidence must be 'label' or 'top'");
  }
  if (a.schedule == "cosine") {
    cfg.schedule = LrSchedule::kCosine;
  } else if (a.schedule == "constant") {
    cfg.schedule = LrSchedule::kConstant;
  } else {
    fail(ErrorKind::kConfig, "--schedule must be 'cosine' or 'constant'");
  }

  const auto t0 = Clock::now();
  const TrainingReport r = train_toy(cfg);
  json config{{"seed", cfg.seed},
              {"steps", cfg.steps},
              {"batch", cfg.batch},
              {"lr_weights", cfg.lr_weights},
              {"lr_quantparams", cfg.lr_quantparams},
              {"alpha", a.alpha ? json(*a.alpha) : json("estimated")},
              {"confidence", a.confidence},
              {"schedule", a.schedule},
              {"freeze_partitions", cfg.freeze_partitions},
              {"rotate", cfg.rotate},
              {"train_examples", cfg.train_examples},
              {"eval_examples", cfg.eval_examples},
              {"calib_examples", cfg.calib_examples},
              {"clip_grid_points", cfg.clip.grid_points},
              {"widths", cfg.model.widths},
              {"group", cfg.model.group_size}};
  json report = envelope("train-toy", config);
  json grids = json::array();
  for (const auto& g : r.grids) {
    grids.push_back({{"layer", g.layer},
                     {"group", g.group},
                     {"params", params_json(g.params)},
                     {"p", g.grids.p},
                     {"t", g.grids.t},
                     {"w", g.grids.w},
                     {"lo", g.grids.lo},
                     {"hi", g.grids.hi}});
  }
  report["result"] = {{"alpha", r.alpha},
                      {"loss", r.loss},
                      {"initial_loss", r.initial_loss},
                      {"final_loss", r.final_loss},
                      {"agreement", r.agreement},
                      {"max_loss_spike", r.max_loss_spike},
                      {"grids", grids}};
  report["timing"]["seconds"] = seconds_since(t0);
  out << "train-toy seed " << cfg.seed << ", " << cfg.steps << " steps" << (cfg.freeze_partitions ? " (frozen partitions)" : "")
      << "\n  alpha " << r.alpha << ", loss " << r.initial_loss << " -> " << r.final_loss << ", agreement "
      << r.agreement << ", max spike " << r.max_loss_spike << "\n";
  write_json(report, a.json_path);
  return kExitOk;
}

}  // namespace

std::string version() { return RCP_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotate-clip-partition quantization toolkit", "rcp"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Group-wise kurtosis (and QErr vs kurtosis with --acts)");
  s->add_option("--weights", stats.weights, "Weight matrix (H, C) as .npy")->required();
  s->add_option("--group", stats.group, "Group size G")->capture_default_str();
  s->add_option("--rotate", stats.rotate, "Fuse a randomized Hadamard with this seed");
  s->add_option("--acts", stats.acts, "Activations (T, C) as .npy");
  s->add_option("--tokens", stats.tokens, "Token cap for the QErr report")->capture_default_str();
  s->add_option("--bits", stats.bits, "Bit width of the QErr quantizer")->capture_default_str();
  s->add_option("--json", stats.json_path, "Write the JSON report here");

  Lemma1Args lemma;
  auto* l = app.add_subcommand("lemma1", "Monte Carlo check of the Hadamard kurtosis law");
  l->add_option("--dist", lemma.dist, "uniform, rademacher, gaussian or arcsine")->capture_default_str();
  l->add_option("--n", lemma.n, "Vector length (power of two)")->capture_default_str();
  l->add_option("--trials", lemma.trials, "Number of vectors")->capture_default_str();
  l->add_option("--seed", lemma.seed, "RNG seed")->capture_default_str();
  l->add_option("--shift", lemma.shift, "Mean shift applied to X")->capture_default_str();
  l->add_option("--json", lemma.json_path, "Write the JSON report here");

  QuantizeArgs quant;
  auto* q = app.add_subcommand("quantize", "Clip search, LDP init, LUT, pack and write RCPQ");
  q->add_option("--weights", quant.weights, "Weight matrix (H, C) as .npy")->required();
  q->add_option("--calib", quant.calib, "Calibration activations (T, C) as .npy")->required();
  q->add_option("--out", quant.out_path, "Output .rcpq path")->required();
  q->add_option("--bits", quant.bits, "Weight bits")->capture_default_str();
  q->add_option("--scheme", quant.scheme, "Quantization scheme")->capture_default_str();
  q->add_option("--group", quant.group, "Group size G")->capture_default_str();
  q->add_option("--grid-points", quant.grid_points, "Clip grid points per axis")->capture_default_str();
  q->add_option("--rotate", quant.rotate, "Fuse a randomized Hadamard with this seed");
  q->add_option("--json", quant.json_path, "Write the JSON report here");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Check an RCPQ file against its source weights");
  v->add_option("model", verify.model, "RCPQ file")->required();
  v->add_option("--against", verify.against, "Source weights as .npy")->required();
  v->add_option("--acts", verify.acts, "Activations (T, C) as .npy")->required();
  v->add_option("--rotate", verify.rotate, "Rotation seed used at quantization");
  v->add_option("--tokens", verify.tokens, "Tokens to run through GEMV")->capture_default_str();
  v->add_option("--tolerance", verify.tolerance, "Normwise relative GEMV tolerance")->capture_default_str();
  v->add_option("--bh", verify.tile_rows, "Fast-path tile rows")->capture_default_str();
  v->add_option("--json", verify.json_path, "Write the JSON report here");

  BenchArgs bench;
  auto* b = app.add_subcommand("gemv-bench", "Time gemv_ref against gemv_fast");
  b->add_option("model", bench.model, "RCPQ file")->required();
  b->add_option("--iters", bench.iters, "Iterations per kernel")->capture_default_str();
  b->add_option("--bh", bench.tile_rows, "Fast-path tile rows")->capture_default_str();
  b->add_option("--seed", bench.seed, "Activation seed")->capture_default_str();
  b->add_option("--threads", bench.threads, "Worker threads (0: RCP_THREADS or hardware)");
  b->add_option("--json", bench.json_path, "Write the JSON report here");

  TrainArgs train;
  auto* t = app.add_subcommand("train-toy", "Toy CAKLD distillation of an LDP student");
  t->add_option("--seed", train.cfg.seed, "RNG seed")->capture_default_str();
  t->add_option("--steps", train.cfg.steps, "Optimizer steps")->capture_default_str();
  t->add_option("--batch", train.cfg.batch, "Minibatch size")->capture_default_str();
  t->add_option("--lr-weights", train.cfg.lr_weights, "Weight learning rate")->capture_default_str();
  t->add_option("--lr-quantparams", train.cfg.lr_quantparams, "Clip/partition learning rate")->capture_default_str();
  t->add_option("--alpha", train.alpha, "Fixed confidence coefficient (default: estimated)");
  t->add_option("--confidence", train.confidence, "label or top")->capture_default_str();
  t->add_option("--schedule", train.schedule, "cosine or constant")->capture_default_str();
  t->add_flag("--freeze-partitions", train.cfg.freeze_partitions, "Keep s1, s2 at their initial values");
  t->add_flag("--no-rotate", train.no_rotate, "Skip the input-side Hadamard fusion");
  t->add_option("--json", train.json_path, "Write the JSON report here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'rcp --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*s) return cmd_stats(stats, out);
    if (*l) return cmd_lemma1(lemma, out);
    if (*q) return cmd_quantize(quant, out);
    if (*v) return cmd_verify(verify, out);
    if (*b) return cmd_gemv_bench(bench, out);
    if (*t) return cmd_train_toy(train, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rcp::cli
