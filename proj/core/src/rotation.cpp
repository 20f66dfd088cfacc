// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/rotation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace rcp {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

void fwht(std::span<double> x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    fail(ErrorKind::kUnsupportedSize, "Walsh-Hadamard length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t base = 0; base < n; base += 2 * half) {
      for (std::size_t i = base; i < base + half; ++i) {
        const double a = x[i];
        const double b = x[i + half];
        x[i] = a + b;
        x[i + half] = a - b;
      }
    }
  }
}

HadamardMatrix::HadamardMatrix(std::size_t n, bool normalized)
    : n_(n), normalized_(normalized), scale_(normalized ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0) {
  if (!is_power_of_two(n)) {
    fail(ErrorKind::kUnsupportedSize, "Hadamard size " + std::to_string(n) + " is not a power of two");
  }
}

double HadamardMatrix::operator()(std::size_t i, std::size_t j) const {
  // Sylvester entry: (-1)^popcount(i & j).
  double v = (std::popcount(i & j) & 1) ? -scale_ : scale_;
  if (!left_signs_.empty()) v *= left_signs_[i];
  if (!right_signs_.empty()) v *= right_signs_[j];
  return v;
}

MatrixD HadamardMatrix::dense() const {
  MatrixD m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

HadamardMatrix HadamardMatrix::transposed() const {
  // H is symmetric, so (Dl H Dr)^T = Dr H Dl.
  HadamardMatrix t = *this;
  std::swap(t.left_signs_, t.right_signs_);
  return t;
}

void HadamardMatrix::apply_right(std::span<double> row) const {
  if (row.size() != n_) {
    fail(ErrorKind::kShape, "row length " + std::to_string(row.size()) + " does not match rotation size " +
                                std::to_string(n_));
  }
  // (x Dl H Dr)_j = r_j * sum_i (x_i l_i) h_ij, and x H = H x for symmetric H.
  if (!left_signs_.empty())
    for (std::size_t i = 0; i < n_; ++i) row[i] *= left_signs_[i];
  fwht(row);
  for (std::size_t j = 0; j < n_; ++j) {
    row[j] *= scale_;
    if (!right_signs_.empty()) row[j] *= right_signs_[j];
  }
}

HadamardMatrix hadamard(std::size_t n, bool normalized) { return HadamardMatrix(n, normalized); }

HadamardMatrix randomized_hadamard(std::size_t n, SeededRng& rng) {
  HadamardMatrix h(n, true);
  h.left_signs_.resize(n);
  for (auto& s : h.left_signs_) s = rng.rademacher();
  return h;
}

double RotationSet::max_orthogonality_error() const {
  double worst = 0.0;
  for (const auto* r : {&r1, &r_head, &r_head_prime, &r3, &r4}) {
    if (*r) worst = std::max(worst, orthogonality_error(**r));
  }
  return worst;
}

namespace {

template <typename T>
double orthogonality_error_dense(const BasicMatrix<T>& r) {
  if (r.rows() != r.cols()) fail(ErrorKind::kShape, "rotation must be square");
  const std::size_t n = r.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += static_cast<double>(r(i, k)) * static_cast<double>(r(j, k));
      worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

MatrixD rotate_rows(MatrixD m, const HadamardMatrix& r) {
  for (std::size_t i = 0; i < m.rows(); ++i) r.apply_right(m.row(i));
  return m;
}

}  // namespace

double orthogonality_error(const MatrixD& r) { return orthogonality_error_dense(r); }
double orthogonality_error(const Matrix& r) { return orthogonality_error_dense(r); }

double orthogonality_error(const HadamardMatrix& r) {
  // Rows of R R^T come from transforming the rows of R by R^T.
  const HadamardMatrix rt = r.transposed();
  double worst = 0.0;
  std::vector<double> row(r.n());
  for (std::size_t i = 0; i < r.n(); ++i) {
    for (std::size_t k = 0; k < r.n(); ++k) row[k] = r(i, k);
    rt.apply_right(row);
    for (std::size_t j = 0; j < r.n(); ++j) worst = std::max(worst, std::abs(row[j] - (i == j ? 1.0 : 0.0)));
  }
  return worst;
}

MatrixD fuse(const MatrixD& w, const HadamardMatrix* r_front, const HadamardMatrix* r_rear) {
  if (r_front && r_front->n() != w.rows()) {
    fail(ErrorKind::kShape, "front rotation size " + std::to_string(r_front->n()) + " vs weight rows " +
                                std::to_string(w.rows()));
  }
  if (r_rear && r_rear->n() != w.cols()) {
    fail(ErrorKind::kShape, "rear rotation size " + std::to_string(r_rear->n()) + " vs weight cols " +
                                std::to_string(w.cols()));
  }
  MatrixD out = w;
  if (r_front) {
    // R^T W = (W^T R)^T
    out = transpose(rotate_rows(transpose(out), *r_front));
  }
  if (r_rear) out = rotate_rows(std::move(out), *r_rear);
  return out;
}

Matrix fuse(const Matrix& w, const HadamardMatrix* r_front, const HadamardMatrix* r_rear) {
  return to_float(fuse(to_double(w), r_front, r_rear));
}

MatrixD apply_online(const MatrixD& x, const HadamardMatrix& r) {
  if (x.cols() != r.n()) {
    fail(ErrorKind::kShape, "activation width " + std::to_string(x.cols()) + " vs rotation size " +
                                std::to_string(r.n()));
  }
  return rotate_rows(x, r);
}

Matrix apply_online(const Matrix& x, const HadamardMatrix& r) { return to_float(apply_online(to_double(x), r)); }

}  // namespace rcp
