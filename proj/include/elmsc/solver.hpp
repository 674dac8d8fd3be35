#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elmsc/dataset.hpp"
#include "elmsc/numerics.hpp"

namespace elmsc::solver {

enum class Ablation {
  full,
  no_sparsity,         // lambda forced to 0 (ELMSC-v1)
  zero_offdiag_blocks  // off-diagonal blocks of X_a replaced by zeros (ELMSC-v2)
};

std::string to_string(Ablation a);
/// Accepts "full", "v1", "v2" and the long names above.
Ablation parse_ablation(const std::string& name);

struct ElmscConfig {
  double lambda = 1.0;
  Index latent_dim = 100;
  double mu0 = 1e-4;
  double mu_max = 1e6;
  double rho = 1.2;
  double tol = 1e-3;
  int max_iter = 100;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Lambda actually used by the J-update under the configured ablation.
  double effective_lambda() const { return ablation == Ablation::no_sparsity ? 0.0 : lambda; }
};

/// ADMM variables. With d = rows(X_a), k = latent_dim, N = v * n:
/// p d x k, h k x N, z and j N x N, e1/y1 d x N, e2/y2 k x N.
struct AdmmState {
  Matrix p, h, z, e1, e2, j, y1, y2, y3;
  double mu = 0.0;
  int iter = 0;
};

struct Residuals {
  double r1 = 0.0;  // ||X_a - P H - E1||_inf
  double r2 = 0.0;  // ||H - H Z - E2||_inf
  double r3 = 0.0;  // ||J - Z||_inf

  bool below(double tol) const { return r1 < tol && r2 < tol && r3 < tol; }
};

struct TraceRecord {
  int iter = 0;
  Residuals residuals;
  double objective = 0.0;
  double mu = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  /// CSV with header iter,r1,r2,r3,objective,mu.
  std::string to_csv() const;
};

struct ErrorBlocks {
  Matrix e1;
  Matrix e2;
};

/// First-order stationarity diagnostics at a solver iterate.
struct KktReport {
  double primal_x = 0.0;     // ||X_a - P H - E1||_inf
  double primal_h = 0.0;     // ||H - H Z - E2||_inf
  double primal_j = 0.0;     // ||J - Z||_inf
  double dual_e = 0.0;       // max column distance of [Y1; Y2] to the l2,1 subdifferential at E
  double dual_j = 0.0;       // max entry distance of -Y3 to lambda * subdifferential at J

  double max_gap() const;
};

struct SolverOutput {
  Matrix z;
  Matrix h;
  Matrix p;
  Matrix e;  // [E1; E2]
  ConvergenceTrace trace;
  bool converged = false;
  KktReport kkt;
  AdmmState state;  // final iterate, for diagnostics
};

/// H ~ N(0, 1) from cfg.seed, every other variable zero, mu = mu0.
AdmmState init_state(const Matrix& xa, const ElmscConfig& cfg);

/// P^T = orthogonal_procrustes(H (Y1/mu + X_a - E1)^T).
Matrix update_p(const AdmmState& s, const Matrix& xa);

/// Minimizer of the H-subproblem: A H + H B = C with A = mu P^T P,
/// B = mu (I - Z)(I - Z)^T and
/// C = P^T Y1 + Y2 (Z^T - I) + mu (P^T X_a - P^T E1 + E2 - E2 Z^T).
/// When P^T P = I the system reduces to H (mu I + B) = C, solved by Cholesky.
Matrix update_h(const AdmmState& s, const Matrix& xa);

/// Z = (H^T H + I)^{-1} [J + H^T H - H^T E2 + (Y3 + H^T Y2) / mu].
Matrix update_z(const AdmmState& s);

/// Column-wise l2,1 prox of G = [X_a - P H + Y1/mu; H - H Z + Y2/mu] at 1/mu.
ErrorBlocks update_e(const AdmmState& s, const Matrix& xa);

/// M = Z - Y3/mu; J keeps the v diagonal n x n blocks of M and soft-thresholds
/// the remaining entries at lambda/mu.
Matrix update_j(const AdmmState& s, double lambda, Index views, Index samples);

/// Dual ascent on Y1, Y2, Y3 with the current mu, then mu <- min(rho mu, mu_max).
AdmmState update_multipliers(AdmmState s, const Matrix& xa, const ElmscConfig& cfg);

Residuals residuals(const AdmmState& s, const Matrix& xa);

/// ||[E1; E2]||_{2,1} + lambda * ||Z - blkdiag(Z)||_1.
double objective(const AdmmState& s, double lambda, Index views, Index samples);

/// Copy of m with its v diagonal n x n blocks zeroed.
Matrix offdiag_blocks(const Matrix& m, Index views, Index samples);

KktReport kkt_residuals(const AdmmState& s, const Matrix& xa, double lambda, Index views,
                        Index samples);

/// Algorithm order per iteration: P, H, Z, E, J, multipliers and mu, then the
/// residual test. Numerical failures are rethrown with the iteration index.
SolverOutput run(const dataset::AugmentedMatrix& xa, const ElmscConfig& cfg);

/// Sum of all v^2 blocks (each n x n) of a vn x vn matrix.
Matrix aggregate_z(const Matrix& z, Index views, Index samples);

}  // namespace elmsc::solver
