// Kernel benchmark: OpenMP implementations against the serial references.
// Prints wall time, speedup, and max-abs agreement for each kernel.
//
//   ./icgnn_bench [n]   (default n = 768)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "icgnn/graph.hpp"
#include "icgnn/kernels.hpp"
#include "icgnn/matrix.hpp"
#include "icgnn/rng.hpp"

using namespace icgnn;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

void report(const char* name, double t_ref, double t_par, double diff) {
  std::printf("%-12s serial %8.3fs   openmp %8.3fs   speedup %5.2fx   max|diff| %.3e\n", name,
              t_ref, t_par, t_ref / t_par, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atol(argv[1])) : 768;
  Rng rng(42);

#ifdef _OPENMP
  std::printf("threads: %d, n = %zu\n", omp_get_max_threads(), n);
#else
  std::printf("threads: 1 (no OpenMP), n = %zu\n", n);
#endif

  {
    const Matrix a = random_matrix(n, n, rng);
    const Matrix b = random_matrix(n, n, rng);
    Matrix r1, r2;
    const double t_ref = seconds([&] { r1 = ref::matmul(a, b); });
    const double t_par = seconds([&] { r2 = kern::matmul(a, b); });
    report("matmul", t_ref, t_par, kern::max_abs_diff(r1, r2));
  }

  {
    // sparse ring-with-chords graph
    std::vector<std::pair<int, int>> edges;
    const int nn = static_cast<int>(n);
    for (int i = 0; i < nn; ++i) {
      edges.emplace_back(i, (i + 1) % nn);
      if (i + 7 < nn) edges.emplace_back(i, i + 7);
    }
    const NormalizedAdjacency adj = normalize_adjacency(nn, edges);
    const Matrix b = random_matrix(n, 64, rng);
    Matrix r1, r2;
    const double t_ref = seconds([&] { r1 = ref::spmm(adj.csr, b); });
    const double t_par = seconds([&] { r2 = kern::spmm(adj.csr, b); });
    report("spmm", t_ref, t_par, kern::max_abs_diff(r1, r2));
  }

  {
    Matrix a = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);  // well-conditioned
    const Matrix rhs = random_matrix(n, n, rng);
    Matrix lu1 = a, lu2 = a;
    std::vector<int> piv1, piv2;
    Matrix x1, x2;
    const double t_ref = seconds([&] {
      ref::lu_factor(lu1, piv1);
      x1 = ref::lu_solve(lu1, piv1, rhs);
    });
    const double t_par = seconds([&] {
      kern::lu_factor(lu2, piv2);
      x2 = kern::lu_solve(lu2, piv2, rhs);
    });
    report("lu+solve", t_ref, t_par, kern::max_abs_diff(x1, x2));
  }

  {
    const Matrix reps = random_matrix(n, 64, rng);
    AffinityGraph g1, g2;
    // the serial path: force one thread via the reference top-k per row
    const double t_par = seconds([&] { g2 = build_knn_affinity(reps, 10); });
    double t_ref;
    {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<double> sim(n);
      std::size_t edges = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t d = 0; d < reps.cols; ++d) dot += reps(i, d) * reps(j, d);
          sim[j] = j == i ? -1.0 : dot;
        }
        edges += static_cast<std::size_t>(ref::top_m(sim.data(), static_cast<int>(n), 10).size());
      }
      t_ref = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (void)edges;
    }
    std::printf("%-12s serial %8.3fs   openmp %8.3fs   speedup %5.2fx   (%zu edges)\n",
                "knn scan", t_ref, t_par, t_ref / t_par, g2.edges.size());
  }

  return 0;
}
