// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/matrix.hpp"

#include <string>

namespace rcp {

namespace {

void check_inner(std::size_t a_cols, std::size_t b_rows) {
  if (a_cols != b_rows) {
    fail(ErrorKind::kShape, "matmul inner dimensions differ: " + std::to_string(a_cols) +
                                " vs " + std::to_string(b_rows));
  }
}

template <typename Out, typename In>
BasicMatrix<Out> matmul_impl(const BasicMatrix<In>& a, const BasicMatrix<In>& b) {
  check_inner(a.cols(), b.rows());
  BasicMatrix<Out> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a(i, k)) * static_cast<double>(b(k, j));
      }
      out(i, j) = static_cast<Out>(acc);
    }
  }
  return out;
}

}  // namespace

MatrixD to_double(const Matrix& m) {
  MatrixD out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i];
  return out;
}

Matrix to_float(const MatrixD& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = static_cast<float>(m.data()[i]);
  return out;
}

Matrix matmul_ref(const Matrix& a, const Matrix& b) { return matmul_impl<float>(a, b); }
MatrixD matmul_ref(const MatrixD& a, const MatrixD& b) { return matmul_impl<double>(a, b); }

}  // namespace rcp
