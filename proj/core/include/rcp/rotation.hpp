// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rcp/matrix.hpp"
#include "rcp/rng.hpp"

namespace rcp {

bool is_power_of_two(std::size_t n) noexcept;

/// In-place unnormalized Walsh-Hadamard transform in Sylvester order:
/// x <- H'_n x. Requires a power-of-two length.
void fwht(std::span<double> x);

/// Sylvester Hadamard matrix with optional random sign diagonals,
/// R = diag(left) * H * diag(right). Entries are never materialized unless
/// dense() is called; products go through the fast transform.
class HadamardMatrix {
 public:
  HadamardMatrix(std::size_t n, bool normalized);

  std::size_t n() const noexcept { return n_; }
  bool normalized() const noexcept { return normalized_; }
  bool randomized() const noexcept { return !left_signs_.empty() || !right_signs_.empty(); }

  double operator()(std::size_t i, std::size_t j) const;
  MatrixD dense() const;
  HadamardMatrix transposed() const;

  /// row <- row * R, in place.
  void apply_right(std::span<double> row) const;

 private:
  friend HadamardMatrix randomized_hadamard(std::size_t n, SeededRng& rng);

  std::size_t n_;
  bool normalized_;
  double scale_;
  std::vector<double> left_signs_;
  std::vector<double> right_signs_;
};

HadamardMatrix hadamard(std::size_t n, bool normalized = true);

/// D * H_n with D a uniform random +-1 diagonal and H_n normalized.
HadamardMatrix randomized_hadamard(std::size_t n, SeededRng& rng);

/// The rotation roles around one decoder layer. R2 is held in factored form
/// (r_head for the V projection, r_head_prime for the attention activation).
struct RotationSet {
  std::optional<HadamardMatrix> r1;
  std::optional<HadamardMatrix> r_head;
  std::optional<HadamardMatrix> r_head_prime;
  std::optional<HadamardMatrix> r3;
  std::optional<HadamardMatrix> r4;

  /// Largest ||R R^T - I||_inf over the present members.
  double max_orthogonality_error() const;
};

/// ||R R^T - I||_inf of the stored entries, products accumulated in binary64.
double orthogonality_error(const MatrixD& r);
double orthogonality_error(const Matrix& r);
double orthogonality_error(const HadamardMatrix& r);

/// W_r = R_front^T W R_rear; an absent rotation is the identity.
MatrixD fuse(const MatrixD& w, const HadamardMatrix* r_front, const HadamardMatrix* r_rear);
Matrix fuse(const Matrix& w, const HadamardMatrix* r_front, const HadamardMatrix* r_rear);

inline MatrixD fuse(const MatrixD& w, const std::optional<HadamardMatrix>& r_front,
                    const std::optional<HadamardMatrix>& r_rear) {
  return fuse(w, r_front ? &*r_front : nullptr, r_rear ? &*r_rear : nullptr);
}
inline Matrix fuse(const Matrix& w, const std::optional<HadamardMatrix>& r_front,
                   const std::optional<HadamardMatrix>& r_rear) {
  return fuse(w, r_front ? &*r_front : nullptr, r_rear ? &*r_rear : nullptr);
}

/// x * r.
MatrixD apply_online(const MatrixD& x, const HadamardMatrix& r);
Matrix apply_online(const Matrix& x, const HadamardMatrix& r);

}  // namespace rcp
