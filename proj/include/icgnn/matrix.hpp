#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace icgnn {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Compressed sparse row matrix (column indices sorted within each row).
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::int64_t> indptr;  // size n_rows + 1
  std::vector<std::int32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  Matrix dense() const {
    Matrix m(n_rows, n_cols);
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::int64_t p = indptr[i]; p < indptr[i + 1]; ++p)
        m(i, static_cast<std::size_t>(indices[p])) = values[p];
    return m;
  }
};

}  // namespace icgnn
