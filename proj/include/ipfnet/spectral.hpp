// Spectra of the bipartite graph induced by a weight matrix W (m x n):
//
//   A(W) = [[0, W], [W^T, 0]],   L(W) = diag(A 1) - A.
//
// The Fiedler value (second-smallest Laplacian eigenvalue) measures how well
// connected the graph is; the Perron pair (leading eigenvalue of A and its
// eigenvector split into row and column blocks) drives the eigenscore used
// when adding edges.
#pragma once

#include <cstddef>
#include <vector>

#include "ipfnet/network.hpp"

namespace ipfnet {

struct LaplacianSpectrum {
  double lambda2 = 0.0;
  std::size_t dimension = 0;  // m + n
  bool connected = false;
  std::size_t iterations = 0;
};

struct SpectralInfo {
  double lambda1 = 0.0;
  std::vector<double> u1;  // row block, unit norm, non-negative
  std::vector<double> v1;  // column block, unit norm, non-negative
  std::size_t iterations = 0;
};

/// True when every row and column node lies in one connected component of the
/// bipartite graph of W.
bool is_connected(const SparseNetwork& w);

/// Fiedler value of L(W). Exactly zero when the graph is disconnected.
/// Otherwise computed by block inverse iteration on the complement of the
/// all-ones vector using a sparse factorization of the grounded Laplacian.
LaplacianSpectrum bipartite_laplacian_fiedler(const SparseNetwork& w);

/// Leading eigenpair of A(W) (equivalently the top singular triple of W).
/// Throws ConvergenceError if the iteration cap is reached.
SpectralInfo perron_spectral(const SparseNetwork& w);

/// Leading eigenvalue of A(W).
double leading_eigenvalue(const SparseNetwork& w);

}  // namespace ipfnet
