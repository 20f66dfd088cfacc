// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rcp/parallel.hpp"

namespace rcp {

namespace {

template <typename T>
double kurtosis_impl(std::span<const T> x) {
  if (x.size() < 4) fail(ErrorKind::kDegenerate, "kurtosis needs at least 4 samples");
  double mean = 0.0;
  for (T v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double m2 = 0.0;
  double m4 = 0.0;
  for (T v : x) {
    const double d = static_cast<double>(v) - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(x.size());
  m4 /= static_cast<double>(x.size());
  if (!(m2 > 0.0)) fail(ErrorKind::kDegenerate, "zero variance");
  return m4 / (m2 * m2) - 3.0;
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Mean over tokens of |X E^T| per output channel, E = Q(W) - W.
std::vector<double> mean_abs_output_error(const MatrixD& x, const MatrixD& q, const MatrixD& w) {
  std::vector<double> out(w.rows(), 0.0);
  std::vector<double> e(w.cols());
  for (std::size_t h = 0; h < w.rows(); ++h) {
    for (std::size_t c = 0; c < w.cols(); ++c) e[c] = q(h, c) - w(h, c);
    double total = 0.0;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      double acc = 0.0;
      const auto xr = x.row(t);
      for (std::size_t c = 0; c < e.size(); ++c) acc += xr[c] * e[c];
      total += std::abs(acc);
    }
    out[h] = total / static_cast<double>(std::max<std::size_t>(x.rows(), 1));
  }
  return out;
}

// Power sums in long double; draws are near zero-mean so the raw-to-central
// conversion does not cancel badly.
struct PowerSums {
  long double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  std::size_t count = 0;

  void add(double v) {
    const long double x = v;
    const long double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    ++count;
  }
  void merge(const PowerSums& o) {
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
    count += o.count;
  }
  double variance() const {
    const long double n = count;
    const long double mu = s1 / n;
    return static_cast<double>(s2 / n - mu * mu);
  }
  double excess_kurtosis() const {
    const long double n = count;
    const long double mu = s1 / n;
    const long double m2 = s2 / n - mu * mu;
    const long double m4 = s4 / n - 4 * mu * s3 / n + 6 * mu * mu * s2 / n - 3 * mu * mu * mu * mu;
    return static_cast<double>(m4 / (m2 * m2) - 3);
  }
};

}  // namespace

double excess_kurtosis(std::span<const double> samples) { return kurtosis_impl(samples); }
double excess_kurtosis(std::span<const float> samples) { return kurtosis_impl(samples); }

std::vector<double> KurtosisReport::channel_mean() const {
  std::vector<double> out(kurtosis.cols(), 0.0);
  for (std::size_t g = 0; g < kurtosis.rows(); ++g)
    for (std::size_t h = 0; h < kurtosis.cols(); ++h) out[h] += kurtosis(g, h);
  for (double& v : out) v /= static_cast<double>(kurtosis.rows());
  return out;
}

double KurtosisReport::mean() const {
  if (kurtosis.empty()) return 0.0;
  const auto d = kurtosis.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

KurtosisReport groupwise_kurtosis(const MatrixD& w, const GroupLayout& layout) {
  if (w.rows() != layout.out_channels || w.cols() != layout.in_channels) {
    fail(ErrorKind::kShape, "weight does not match group layout");
  }
  KurtosisReport report;
  report.kurtosis = MatrixD(layout.num_groups(), layout.out_channels);
  std::size_t platy = 0;
  for (std::size_t h = 0; h < layout.out_channels; ++h) {
    for (std::size_t g = 0; g < layout.num_groups(); ++g) {
      std::span<const double> group(w.row(h).data() + g * layout.group_size, layout.group_size);
      double k;
      try {
        k = excess_kurtosis(group);
      } catch (const Error& e) {
        fail(e.kind(), "group (g=" + std::to_string(g) + ", h=" + std::to_string(h) + "): " + e.what());
      }
      report.kurtosis(g, h) = k;
      if (k < 0) ++platy;
    }
  }
  report.platykurtic_fraction =
      layout.total_groups() ? static_cast<double>(platy) / static_cast<double>(layout.total_groups()) : 0.0;
  return report;
}

KurtosisReport groupwise_kurtosis(const Matrix& w, const GroupLayout& layout) {
  return groupwise_kurtosis(to_double(w), layout);
}

QErrReport qerr_vs_kurt(const MatrixD& w, const MatrixD& x, const HadamardMatrix* rotation,
                        const WeightQuantizer& quantizer, const GroupLayout& layout) {
  if (x.cols() != w.cols()) fail(ErrorKind::kShape, "activations and weights disagree on C");
  const MatrixD w_r = rotation ? fuse(w, nullptr, rotation) : w;
  const MatrixD x_r = rotation ? apply_online(x, *rotation) : x;

  const auto base = quantizer(w, x, layout);
  const auto rot = quantizer(w_r, x_r, layout);

  QErrReport r;
  r.tokens = x.rows();
  r.qerr_before = mean_abs_output_error(x, base.dequantized, base.clipped);
  r.qerr_after = mean_abs_output_error(x_r, rot.dequantized, rot.clipped);
  r.kurt_before = groupwise_kurtosis(w, layout).channel_mean();
  r.kurt_after = groupwise_kurtosis(w_r, layout).channel_mean();
  r.delta_kurt.resize(w.rows());
  r.delta_qerr.resize(w.rows());
  for (std::size_t h = 0; h < w.rows(); ++h) {
    r.delta_kurt[h] = r.kurt_after[h] - r.kurt_before[h];
    r.delta_qerr[h] = r.qerr_after[h] - r.qerr_before[h];
  }
  r.spearman = spearman(r.delta_kurt, r.delta_qerr);
  return r;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kShape, "spearman inputs differ in length");
  if (a.size() < 2) return 0.0;
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Distribution parse_distribution(std::string_view name) {
  if (name == "uniform") return Distribution::kUniform;
  if (name == "rademacher") return Distribution::kRademacher;
  if (name == "gaussian" || name == "normal") return Distribution::kGaussian;
  if (name == "arcsine") return Distribution::kArcsine;
  fail(ErrorKind::kConfig, "unsupported distribution '" + std::string(name) + "'");
}

std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::kUniform: return "uniform";
    case Distribution::kRademacher: return "rademacher";
    case Distribution::kGaussian: return "gaussian";
    case Distribution::kArcsine: return "arcsine";
  }
  return "unknown";
}

double distribution_kurtosis(Distribution d) {
  switch (d) {
    case Distribution::kUniform: return -1.2;
    case Distribution::kRademacher: return -2.0;
    case Distribution::kGaussian: return 0.0;
    case Distribution::kArcsine: return -1.5;
  }
  return 0.0;
}

double sample(Distribution d, SeededRng& rng) {
  switch (d) {
    case Distribution::kUniform: return rng.uniform(-1.0, 1.0);
    case Distribution::kRademacher: return rng.rademacher();
    case Distribution::kGaussian: return rng.normal();
    case Distribution::kArcsine: return std::sin(std::numbers::pi * (rng.uniform01() - 0.5));
  }
  return 0.0;
}

Lemma1Report lemma1_mc(Distribution dist, std::size_t n, std::size_t trials, SeededRng& rng,
                       double shift) {
  if (!is_power_of_two(n)) fail(ErrorKind::kUnsupportedSize, "n must be a power of two");
  if (trials == 0) fail(ErrorKind::kConfig, "trials must be positive");

  // Trials are split into fixed chunks, each with its own forked stream, and
  // merged in chunk order so the result does not depend on the worker count.
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  const std::uint64_t base_seed = rng.next();
  struct ChunkSums {
    PowerSums before, after, rest;
    std::vector<PowerSums> components;
  };
  std::vector<ChunkSums> parts(chunks);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));

  parallel_for(chunks, [&](std::size_t c) {
    SeededRng local = SeededRng(base_seed).fork(c);
    ChunkSums& part = parts[c];
    part.components.resize(n);
    std::vector<double> v(n);
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(trials, begin + kChunk);
    for (std::size_t t = begin; t < end; ++t) {
      for (double& x : v) {
        x = sample(dist, local) + shift;
        part.before.add(x);
      }
      fwht(v);
      for (std::size_t i = 0; i < n; ++i) {
        const double y = v[i] * norm;
        part.after.add(y);
        part.components[i].add(y);
        if (i > 0) part.rest.add(y);
      }
    }
  });

  PowerSums before, after, rest;
  std::vector<PowerSums> components(n);
  for (const auto& part : parts) {
    before.merge(part.before);
    after.merge(part.after);
    rest.merge(part.rest);
    for (std::size_t i = 0; i < n; ++i) components[i].merge(part.components[i]);
  }

  Lemma1Report r;
  r.dist = dist;
  r.n = n;
  r.trials = trials;
  r.kurt_before = before.excess_kurtosis();
  r.kurt_after = after.excess_kurtosis();
  r.expected_after = distribution_kurtosis(dist) / static_cast<double>(n);
  r.mean_first = static_cast<double>(components[0].s1 / static_cast<long double>(components[0].count));
  r.mean_rest = rest.count ? static_cast<double>(rest.s1 / static_cast<long double>(rest.count)) : 0.0;
  r.var_before = before.variance();
  r.var_after_min = INFINITY;
  r.var_after_max = -INFINITY;
  for (const auto& comp : components) {
    r.var_after_min = std::min(r.var_after_min, comp.variance());
    r.var_after_max = std::max(r.var_after_max, comp.variance());
  }
  return r;
}

}  // namespace rcp
