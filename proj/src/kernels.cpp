#include "icgnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "icgnn/errors.hpp"

namespace icgnn::kern {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double* crow = c.row(static_cast<std::size_t>(i));
    const double* arow = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;  // feature matrices are often mostly zero
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.cols; ++j) t(j, static_cast<std::size_t>(i)) = arow[j];
  }
  return t;
}

Matrix matmul_transA(const Matrix& a, const Matrix& b) {
  // Materializing a' keeps the inner loops contiguous; the copy is O(rows*cols)
  // against the O(rows*cols*b.cols) product.
  return matmul(transpose(a), b);
}

Matrix matmul_transB(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_transB: shape mismatch");
  Matrix c(a.rows, b.rows);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      crow[j] = s;
    }
  }
  return c;
}

Matrix spmm(const CsrMatrix& a, const Matrix& b) {
  if (a.n_cols != b.rows) throw std::invalid_argument("spmm: shape mismatch");
  Matrix c(a.n_rows, b.cols);
  const std::int64_t n = static_cast<std::int64_t>(a.n_rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double* crow = c.row(static_cast<std::size_t>(i));
    for (std::int64_t p = a.indptr[i]; p < a.indptr[i + 1]; ++p) {
      const double v = a.values[p];
      const double* brow = b.row(static_cast<std::size_t>(a.indices[p]));
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += v * brow[j];
    }
  }
  return c;
}

void lu_factor(Matrix& a, std::vector<int>& pivots) {
  if (a.rows != a.cols) throw std::invalid_argument("lu_factor: matrix not square");
  const std::size_t n = a.rows;
  pivots.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(a(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) throw NumericError("lu_factor: singular matrix");
    pivots[k] = static_cast<int>(p);
    if (p != k) std::swap_ranges(a.row(k), a.row(k) + n, a.row(p));
    const double akk = a(k, k);
    const double* rowk = a.row(k);
    const std::int64_t lo = static_cast<std::int64_t>(k) + 1;
    const std::int64_t hi = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = lo; i < hi; ++i) {
      double* rowi = a.row(static_cast<std::size_t>(i));
      const double l = rowi[k] / akk;
      rowi[k] = l;
      for (std::size_t j = k + 1; j < n; ++j) rowi[j] -= l * rowk[j];
    }
  }
}

namespace {

// One right-hand side, stored contiguously. Permutation, forward then back
// substitution against the packed LU factors.
void lu_solve_one(const Matrix& lu, const std::vector<int>& pivots, double* b) {
  const std::size_t n = lu.rows;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t p = static_cast<std::size_t>(pivots[k]);
    if (p != k) std::swap(b[k], b[p]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double* rowi = lu.row(i);
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= rowi[j] * b[j];
    b[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const double* rowi = lu.row(ii);
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= rowi[j] * b[j];
    b[ii] = s / rowi[ii];
  }
}

}  // namespace

Matrix lu_solve(const Matrix& lu, const std::vector<int>& pivots, const Matrix& rhs) {
  if (lu.rows != rhs.rows) throw std::invalid_argument("lu_solve: shape mismatch");
  Matrix bt = transpose(rhs);  // each right-hand side becomes a contiguous row
  const std::int64_t m = static_cast<std::int64_t>(bt.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < m; ++r) lu_solve_one(lu, pivots, bt.row(static_cast<std::size_t>(r)));
  return transpose(bt);
}

std::vector<int> top_m(const double* values, int n, int m) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const int take = std::min(m, n);
  auto better = [values](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + take, idx.end(), better);
  idx.resize(static_cast<std::size_t>(take));
  return idx;
}

void row_softmax(Matrix& m) {
  const std::int64_t n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double* row = m.row(static_cast<std::size_t>(i));
    double mx = row[0];
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < m.cols; ++j) row[j] /= s;
  }
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    d = std::max(d, std::fabs(a.data[i] - b.data[i]));
  return d;
}

}  // namespace icgnn::kern

namespace icgnn::ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix spmm(const CsrMatrix& a, const Matrix& b) {
  return matmul(a.dense(), b);
}

void lu_factor(Matrix& a, std::vector<int>& pivots) {
  if (a.rows != a.cols) throw std::invalid_argument("lu_factor: matrix not square");
  const std::size_t n = a.rows;
  pivots.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(a(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) throw NumericError("lu_factor: singular matrix");
    pivots[k] = static_cast<int>(p);
    if (p != k) std::swap_ranges(a.row(k), a.row(k) + n, a.row(p));
    const double akk = a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = a(i, k) / akk;
      a(i, k) = l;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
    }
  }
}

Matrix lu_solve(const Matrix& lu, const std::vector<int>& pivots, const Matrix& rhs) {
  if (lu.rows != rhs.rows) throw std::invalid_argument("lu_solve: shape mismatch");
  const std::size_t n = lu.rows;
  Matrix x = rhs;
  for (std::size_t c = 0; c < x.cols; ++c) {
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = x(i, c);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t p = static_cast<std::size_t>(pivots[k]);
      if (p != k) std::swap(b[k], b[p]);
    }
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) b[i] -= lu(i, j) * b[j];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) b[ii] -= lu(ii, j) * b[j];
      b[ii] /= lu(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) x(i, c) = b[i];
  }
  return x;
}

std::vector<int> top_m(const double* values, int n, int m) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [values](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(std::min(m, n)));
  return idx;
}

}  // namespace icgnn::ref
