#pragma once

#include <vector>

#include "icgnn/matrix.hpp"

namespace icgnn::kern {

// OpenMP kernels. Every parallel loop assigns each output row (or right-hand
// side) to exactly one thread and accumulates serially inside it, so results
// are bit-identical for any thread count.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix matmul_transA(const Matrix& a, const Matrix& b);  // returns a' * b
Matrix matmul_transB(const Matrix& a, const Matrix& b);  // returns a * b'
Matrix spmm(const CsrMatrix& a, const Matrix& b);

/// In-place LU factorization with partial pivoting. pivots[k] is the row
/// swapped into position k at step k. Throws NumericError on a zero pivot.
void lu_factor(Matrix& a, std::vector<int>& pivots);

/// Solve (LU)·X = B for multiple right-hand sides (columns of B).
Matrix lu_solve(const Matrix& lu, const std::vector<int>& pivots, const Matrix& rhs);

/// Indices of the m largest entries, ordered by (value desc, index asc).
/// m >= n returns all n indices.
std::vector<int> top_m(const double* values, int n, int m);

void row_softmax(Matrix& m);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace icgnn::kern

namespace icgnn::ref {

// Serial reference implementations with independent loop ordering. Oracles
// for the kernel tests and the baseline in the kernel benchmark.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix spmm(const CsrMatrix& a, const Matrix& b);
void lu_factor(Matrix& a, std::vector<int>& pivots);
Matrix lu_solve(const Matrix& lu, const std::vector<int>& pivots, const Matrix& rhs);
std::vector<int> top_m(const double* values, int n, int m);

}  // namespace icgnn::ref
