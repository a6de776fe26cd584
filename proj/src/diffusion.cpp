#include "icgnn/diffusion.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "icgnn/errors.hpp"
#include "icgnn/kernels.hpp"

namespace icgnn {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ConfigError("ppr: teleport probability must lie in (0,1), got " +
                      std::to_string(epsilon));
}

void clamp_negative_dust(Matrix& m) {
  for (double& v : m.data) {
    if (v < 0.0) {
      if (v < -1e-9) throw NumericError("ppr: solve produced a significantly negative entry");
      v = 0.0;
    }
  }
}

}  // namespace

DiffusionMatrix ppr_diffusion(const NormalizedAdjacency& adj, double epsilon,
                              DiffusionSource source, int dense_cap) {
  check_epsilon(epsilon);
  const std::size_t n = static_cast<std::size_t>(adj.n);
  Matrix system = adj.dense(dense_cap);
  for (double& v : system.data) v = -(1.0 - epsilon) * v;
  for (std::size_t i = 0; i < n; ++i) system(i, i) += 1.0;

  Matrix lu = system;
  std::vector<int> pivots;
  kern::lu_factor(lu, pivots);
  Matrix rhs(n, n);
  for (std::size_t i = 0; i < n; ++i) rhs(i, i) = epsilon;
  Matrix t = kern::lu_solve(lu, pivots, rhs);

  // Residual check on a deterministic sample of columns; full product would
  // double the cost of the solve at scale.
  const std::size_t n_check = n <= 256 ? n : 16;
  const std::size_t stride = n / n_check;
  double residual = 0.0;
  for (std::size_t c = 0; c < n_check; ++c) {
    const std::size_t col = c * stride;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += system(i, k) * t(k, col);
      s -= (i == col) ? epsilon : 0.0;
      residual = std::max(residual, std::fabs(s));
    }
  }
  if (residual > 1e-8)
    std::fprintf(stderr, "ppr_diffusion: residual %.3e exceeds 1e-8 on %zu checked columns\n",
                 residual, n_check);

  clamp_negative_dust(t);
  return DiffusionMatrix{std::move(t), epsilon, source, residual};
}

DiffusionMatrix ppr_power_series(const NormalizedAdjacency& adj, double epsilon, double tol,
                                 DiffusionSource source) {
  check_epsilon(epsilon);
  if (!(tol > 0.0)) throw ConfigError("ppr_power_series: tol must be positive");
  const std::size_t n = static_cast<std::size_t>(adj.n);
  Matrix term = Matrix::identity(n);
  Matrix acc(n, n);
  for (std::size_t i = 0; i < n; ++i) acc(i, i) = epsilon;
  double decay = 1.0;
  for (long k = 0;; ++k) {
    decay *= 1.0 - epsilon;
    if (decay / epsilon < tol) break;
    term = kern::spmm(adj.csr, term);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += epsilon * decay * term.data[i];
  }
  return DiffusionMatrix{std::move(acc), epsilon, source, 0.0};
}

RowStochasticDiffusion row_normalize(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* row = out.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) s += row[j];
    if (!(s > 0.0))
      throw NumericError("row_normalize: row " + std::to_string(i) + " has non-positive sum");
    for (std::size_t j = 0; j < out.cols; ++j) row[j] /= s;
  }
  return RowStochasticDiffusion{std::move(out)};
}

RowStochasticDiffusion row_normalize(const DiffusionMatrix& diff) {
  return row_normalize(diff.m);
}

}  // namespace icgnn
