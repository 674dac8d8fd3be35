#pragma once
// Random ADMM states and the per-variable subproblem objectives, written out
// directly from the augmented Lagrangian for use as test oracles.

#include <cmath>

#include "elmsc/rng.hpp"
#include "elmsc/solver.hpp"
#include "oracles.hpp"

namespace fixture {

using elmsc::Index;
using elmsc::Matrix;
using elmsc::solver::AdmmState;

struct Instance {
  Matrix xa;
  AdmmState state;
  Index views = 0;
  Index samples = 0;
  double lambda = 0.0;
};

// d <= 12, k <= 5, v <= 3, n <= 10 with an orthonormal-column P.
inline Instance random_instance(std::uint64_t seed) {
  elmsc::Rng rng(seed);
  Instance in;
  in.views = 1 + static_cast<Index>(rng.below(3));
  in.samples = 2 + static_cast<Index>(rng.below(9));
  const Index k = 1 + static_cast<Index>(rng.below(5));
  const Index d = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(13 - k)));
  const Index cols = in.views * in.samples;
  in.lambda = 0.05 + rng.uniform();

  in.xa = rng.gaussian_matrix(d, cols);
  AdmmState& s = in.state;
  s.p = oracle::random_row_orthonormal(rng, k, d).transpose();
  s.h = rng.gaussian_matrix(k, cols);
  s.z = 0.3 * rng.gaussian_matrix(cols, cols);
  s.e1 = 0.2 * rng.gaussian_matrix(d, cols);
  s.e2 = 0.2 * rng.gaussian_matrix(k, cols);
  s.j = 0.3 * rng.gaussian_matrix(cols, cols);
  s.y1 = 0.5 * rng.gaussian_matrix(d, cols);
  s.y2 = 0.5 * rng.gaussian_matrix(k, cols);
  s.y3 = 0.5 * rng.gaussian_matrix(cols, cols);
  s.mu = 0.2 + 2.0 * rng.uniform();
  return in;
}

// Phi(Y, R) = mu/2 ||R||^2 + tr(Y^T R)
inline double phi(const Matrix& y, const Matrix& r, double mu) {
  return 0.5 * mu * r.squaredNorm() + (y.array() * r.array()).sum();
}

inline double p_objective(const AdmmState& s, const Matrix& xa, const Matrix& p) {
  return phi(s.y1, xa - p * s.h - s.e1, s.mu);
}

inline double h_objective(const AdmmState& s, const Matrix& xa, const Matrix& h) {
  return phi(s.y1, xa - s.p * h - s.e1, s.mu) + phi(s.y2, h - h * s.z - s.e2, s.mu);
}

inline double z_objective(const AdmmState& s, const Matrix& z) {
  return phi(s.y3, s.j - z, s.mu) + phi(s.y2, s.h - s.h * z - s.e2, s.mu);
}

inline double e_objective(const AdmmState& s, const Matrix& xa, const Matrix& e1, const Matrix& e2) {
  Matrix e(e1.rows() + e2.rows(), e1.cols());
  e << e1, e2;
  return oracle::l21(e) + phi(s.y1, xa - s.p * s.h - e1, s.mu) +
         phi(s.y2, s.h - s.h * s.z - e2, s.mu);
}

inline double offdiag_l1(const Matrix& m, Index views, Index samples) {
  double total = 0.0;
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      if (r / samples != c / samples) total += std::abs(m(r, c));
  (void)views;
  return total;
}

inline double j_objective(const AdmmState& s, const Matrix& j, double lambda, Index views,
                          Index samples) {
  return lambda * offdiag_l1(j, views, samples) + phi(s.y3, j - s.z, s.mu);
}

}  // namespace fixture
