#pragma once

#include <cstdint>
#include <vector>

#include "elmsc/numerics.hpp"

namespace elmsc::spectral {

/// Symmetric nonnegative similarity graph.
struct Affinity {
  Matrix w;
};

struct KmeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
  // Inertia after each Lloyd step of the winning restart.
  std::vector<double> history;
};

struct ClusteringResult {
  std::vector<int> labels;  // values in [0, c)
  Matrix embedding;         // n x c
  double kmeans_inertia = 0.0;
  Affinity affinity;
  Matrix laplacian;
  Vector eigenvalues;  // the c smallest Laplacian eigenvalues
};

struct ClusterOptions {
  int restarts = 10;
  std::uint64_t seed = 0;
  // Scale each embedding row to unit length before k-means.
  bool normalize_rows = false;
};

/// W = (|Z| + |Z^T|) / 2.
Affinity affinity(const Matrix& zhat);

/// Unnormalized graph Laplacian D - W with d_ii = sum_j w_ij.
Matrix laplacian(const Affinity& w);

/// Eigenvectors of the c smallest eigenvalues of l, as columns.
Matrix spectral_embed(const Matrix& l, Index c);

/// Lloyd's algorithm over the rows of `points`, seeded by greedy k-means++
/// (D^2 sampling, best of 2 + floor(ln c) candidates per center); returns the
/// lowest-inertia run among `restarts`. Assignment ties go to the lowest
/// centroid index; restart ties to the lowest restart index.
KmeansResult kmeans(const Matrix& points, Index c, int restarts, std::uint64_t seed);

ClusteringResult cluster(const Matrix& zhat, Index c, const ClusterOptions& options = {});

}  // namespace elmsc::spectral
