#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace elmsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace numerics {

/// Thin singular value decomposition m = u * diag(s) * vt.
/// Singular values are nonincreasing; u has min(rows, cols) orthonormal
/// columns and vt has min(rows, cols) orthonormal rows.
struct SvdFactors {
  Matrix u;
  Vector s;
  Matrix vt;
};

/// Symmetric eigendecomposition m = q * diag(lambda) * q^T with eigenvalues
/// in nondecreasing order.
struct SymEigFactors {
  Matrix q;
  Vector lambda;
};

struct PcaResult {
  Matrix reduced;  // m x n, samples as columns
  double retained_variance = 0.0;
};

/// Throws NumericalError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

/// Thin SVD. Throws NumericalError if the iteration fails to converge.
SvdFactors svd(const Matrix& m);

/// Eigendecomposition of a (numerically) symmetric matrix. The input is
/// symmetrized as (m + m^T) / 2 before factorization; a symmetry defect
/// above 1e-8 * max|m| is a contract violation.
SymEigFactors sym_eig(const Matrix& m);

/// Solves a * h + h * b = c for symmetric a (k x k) and b (m x m) by
/// diagonalizing both: with a = Qa Da Qa^T and b = Qb Db Qb^T the
/// transformed system is diagonal, h~_ij = c~_ij / (alpha_i + beta_j).
/// Throws NumericalError when some |alpha_i + beta_j| <= 1e-12.
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c);

/// Row-orthonormal maximizer of trace(R * k^T) for an r x c matrix k with
/// r <= c: R = u * vt from the thin SVD of k. Logs a warning when k is
/// rank deficient; the result is still row-orthonormal.
Matrix orthogonal_procrustes(const Matrix& k);

/// Entrywise shrinkage (|x| - eta)_+ * sgn(x).
Matrix soft_threshold(const Matrix& m, double eta);

/// Proximal map of tau * ||.||_{2,1} (sum of column norms): each column is
/// scaled by (1 - tau / ||g_i||)_+.
Matrix col_l21_prox(const Matrix& g, double tau);

/// Sum of Euclidean column norms.
double l21_norm(const Matrix& m);

/// Projects centered samples (columns of x) onto the top-m principal
/// directions. Each direction's sign is fixed so that its largest-magnitude
/// loading is positive.
PcaResult pca_reduce(const Matrix& x, Index m);

/// Cholesky solve of a * x = b for symmetric positive definite a.
Matrix spd_solve(const Matrix& a, const Matrix& b);

}  // namespace numerics
}  // namespace elmsc
