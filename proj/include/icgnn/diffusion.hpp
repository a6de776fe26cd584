#pragma once

#include "icgnn/graph.hpp"
#include "icgnn/matrix.hpp"

namespace icgnn {

enum class DiffusionSource { structure, attribute };

/// Personalized-PageRank diffusion: teleport * inverse(I - (1-teleport) * Ahat).
/// Row k is node k's outward influence distribution. Nonnegative; rows sum to
/// 1 on regular graphs.
struct DiffusionMatrix {
  Matrix m;
  double teleport = 0.0;
  DiffusionSource source = DiffusionSource::structure;
  double residual = 0.0;  // max |(I-(1-eps)Ahat)T - eps I| over checked columns
};

struct RowStochasticDiffusion {
  Matrix m;
};

/// Dense direct solve of (I - (1-epsilon) Ahat) X = epsilon I. Negative
/// floating-point dust is clamped to zero. Emits a stderr diagnostic when the
/// checked residual exceeds 1e-8.
DiffusionMatrix ppr_diffusion(const NormalizedAdjacency& adj, double epsilon,
                              DiffusionSource source = DiffusionSource::structure,
                              int dense_cap = 20000);

/// Truncated Neumann series epsilon * sum_k (1-epsilon)^k Ahat^k, stopped when
/// the geometric tail bound (1-epsilon)^(k+1)/epsilon drops below tol.
/// Independent oracle for ppr_diffusion.
DiffusionMatrix ppr_power_series(const NormalizedAdjacency& adj, double epsilon, double tol,
                                 DiffusionSource source = DiffusionSource::structure);

/// Each row divided by its sum. Throws NumericError on a non-positive row sum.
RowStochasticDiffusion row_normalize(const DiffusionMatrix& diff);
RowStochasticDiffusion row_normalize(const Matrix& m);

}  // namespace icgnn
