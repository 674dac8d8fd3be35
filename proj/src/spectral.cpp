#include "elmsc/spectral.hpp"

#include <cmath>
#include <limits>

#include "elmsc/errors.hpp"
#include "elmsc/rng.hpp"

namespace elmsc::spectral {

namespace {

constexpr int kMaxLloydIterations = 300;

Index pick_weighted(const Vector& weights, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) return static_cast<Index>(rng.below(static_cast<std::uint64_t>(weights.size())));
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += weights(i);
    if (target < acc) return i;
  }
  // Rounding can leave target == total; fall back to the last positive weight.
  for (Index i = weights.size() - 1; i > 0; --i)
    if (weights(i) > 0.0) return i;
  return 0;
}

Matrix seed_centers(const Matrix& pts, Index c, Rng& rng) {
  const Index n = pts.rows();
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(c)));
  Matrix centers(c, pts.cols());
  const Index first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = pts.row(first);
  Vector closest = (pts.rowwise() - pts.row(first)).rowwise().squaredNorm();

  for (Index ci = 1; ci < c; ++ci) {
    Index best = -1;
    double best_potential = std::numeric_limits<double>::infinity();
    Vector best_closest;
    for (int t = 0; t < trials; ++t) {
      const Index cand = pick_weighted(closest, rng);
      const Vector d2 = (pts.rowwise() - pts.row(cand)).rowwise().squaredNorm();
      Vector merged = closest.cwiseMin(d2);
      const double potential = merged.sum();
      if (potential < best_potential) {
        best_potential = potential;
        best = cand;
        best_closest = std::move(merged);
      }
    }
    centers.row(ci) = pts.row(best);
    closest = std::move(best_closest);
  }
  return centers;
}

// Assigns every point to its nearest center; returns the inertia.
double assign(const Matrix& pts, const Matrix& centers, std::vector<int>& labels, Vector& dist) {
  double inertia = 0.0;
  for (Index i = 0; i < pts.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d = (pts.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist(i) = best_d;
    inertia += best_d;
  }
  return inertia;
}

KmeansResult lloyd(const Matrix& pts, Index c, Rng& rng) {
  const Index n = pts.rows();
  Matrix centers = seed_centers(pts, c, rng);
  KmeansResult out;
  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  Vector dist(n);

  for (int it = 0; it < kMaxLloydIterations; ++it) {
    const double inertia = assign(pts, centers, labels, dist);
    out.history.push_back(inertia);
    out.inertia = inertia;
    if (labels == out.labels) break;
    out.labels = labels;

    Matrix sums = Matrix::Zero(c, pts.cols());
    std::vector<Index> counts(static_cast<std::size_t>(c), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (Index k = 0; k < c; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        centers.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
      } else {
        // Re-seed an empty cluster at the point farthest from its center.
        Index far = 0;
        dist.maxCoeff(&far);
        centers.row(k) = pts.row(far);
        dist(far) = 0.0;
      }
    }
  }
  return out;
}

}  // namespace

Affinity affinity(const Matrix& zhat) {
  if (zhat.rows() != zhat.cols()) throw ContractError("affinity: matrix must be square");
  const Matrix a = zhat.cwiseAbs();
  Matrix w = 0.5 * (a + a.transpose());
  // Mirror the lower triangle so symmetry is exact regardless of rounding.
  for (Index j = 0; j < w.cols(); ++j)
    for (Index i = 0; i < j; ++i) w(i, j) = w(j, i);
  return {std::move(w)};
}

Matrix laplacian(const Affinity& w) {
  Matrix l = -w.w;
  l.diagonal() += w.w.rowwise().sum();
  return l;
}

Matrix spectral_embed(const Matrix& l, Index c) {
  if (c < 1 || c > l.rows())
    throw ContractError("spectral_embed: cluster count " + std::to_string(c) + " outside [1, " +
                        std::to_string(l.rows()) + "]");
  return numerics::sym_eig(l).q.leftCols(c);
}

KmeansResult kmeans(const Matrix& points, Index c, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw ContractError("kmeans: restarts must be >= 1");
  if (c < 1 || c > points.rows())
    throw ContractError("kmeans: cluster count " + std::to_string(c) + " outside [1, " +
                        std::to_string(points.rows()) + "]");
  numerics::require_finite(points, "kmeans points");
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    KmeansResult run = lloyd(points, c, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

ClusteringResult cluster(const Matrix& zhat, Index c, const ClusterOptions& options) {
  ClusteringResult out;
  out.affinity = affinity(zhat);
  out.laplacian = laplacian(out.affinity);
  if (c < 1 || c > zhat.rows())
    throw ContractError("cluster: cluster count " + std::to_string(c) + " outside [1, " +
                        std::to_string(zhat.rows()) + "]");
  const numerics::SymEigFactors eig = numerics::sym_eig(out.laplacian);
  out.embedding = eig.q.leftCols(c);
  out.eigenvalues = eig.lambda.head(c);

  Matrix points = out.embedding;
  if (options.normalize_rows) {
    for (Index i = 0; i < points.rows(); ++i) {
      const double norm = points.row(i).norm();
      if (norm > 0.0) points.row(i) /= norm;
    }
  }
  KmeansResult km = kmeans(points, c, options.restarts, options.seed);
  out.labels = std::move(km.labels);
  out.kmeans_inertia = km.inertia;
  return out;
}

}  // namespace elmsc::spectral
