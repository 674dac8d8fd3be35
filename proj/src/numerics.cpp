#include "elmsc/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "elmsc/errors.hpp"

namespace elmsc::numerics {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_nonempty(const Matrix& m, std::string_view what) {
  if (m.size() == 0)
    throw ContractError(std::string(what) + ": empty matrix");
}

// Rank-deficiency warnings from the Procrustes step recur every solver
// iteration on low-rank data, so only the first one is raised to warn level.
std::atomic<bool> procrustes_warned{false};

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite())
    throw NumericalError(std::string(what) + ": non-finite entries in " + dims(m) +
                         " matrix");
}

SvdFactors svd(const Matrix& m) {
  require_nonempty(m, "svd");
  require_finite(m, "svd input");
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw NumericalError("svd: iteration failed to converge on " + dims(m) + " matrix");
  SvdFactors f{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
  require_finite(f.u, "svd factor u");
  require_finite(f.vt, "svd factor vt");
  return f;
}

SymEigFactors sym_eig(const Matrix& m) {
  if (m.rows() != m.cols())
    throw ContractError("sym_eig: matrix must be square, got " + dims(m));
  require_nonempty(m, "sym_eig");
  require_finite(m, "sym_eig input");
  const double scale = m.cwiseAbs().maxCoeff();
  const double defect = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (defect > 1e-8 * scale)
    throw ContractError("sym_eig: matrix is not symmetric (defect " + std::to_string(defect) +
                        ")");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> dec(sym);
  if (dec.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigensolver failed on " + dims(m) + " matrix");
  return {dec.eigenvectors(), dec.eigenvalues()};
}

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (a.rows() != a.cols() || b.rows() != b.cols())
    throw ContractError("solve_sylvester: a and b must be square");
  if (c.rows() != a.rows() || c.cols() != b.rows())
    throw ContractError("solve_sylvester: c is " + dims(c) + ", expected " +
                        std::to_string(a.rows()) + "x" + std::to_string(b.rows()));
  require_finite(c, "solve_sylvester rhs");

  const SymEigFactors ea = sym_eig(a);
  const SymEigFactors eb = sym_eig(b);
  Matrix ct = ea.q.transpose() * c * eb.q;
  for (Index j = 0; j < ct.cols(); ++j) {
    for (Index i = 0; i < ct.rows(); ++i) {
      const double denom = ea.lambda(i) + eb.lambda(j);
      if (std::abs(denom) <= 1e-12) {
        std::ostringstream os;
        os << "solve_sylvester: singular spectral pair alpha[" << i << "]=" << ea.lambda(i)
           << ", beta[" << j << "]=" << eb.lambda(j);
        throw NumericalError(os.str());
      }
      ct(i, j) /= denom;
    }
  }
  Matrix h = ea.q * ct * eb.q.transpose();
  require_finite(h, "solve_sylvester result");
  return h;
}

Matrix orthogonal_procrustes(const Matrix& k) {
  if (k.rows() > k.cols())
    throw ContractError("orthogonal_procrustes: expected rows <= cols, got " + dims(k));
  const SvdFactors f = svd(k);
  const double tiny = std::numeric_limits<double>::epsilon() *
                      static_cast<double>(k.cols()) * std::max(f.s(0), 1.0);
  if (f.s(f.s.size() - 1) <= tiny) {
    const auto level = procrustes_warned.exchange(true) ? spdlog::level::debug
                                                        : spdlog::level::warn;
    spdlog::log(level, "orthogonal_procrustes: rank-deficient {} input (smallest singular value {:g})",
                dims(k), f.s(f.s.size() - 1));
  }
  return f.u * f.vt;
}

Matrix soft_threshold(const Matrix& m, double eta) {
  if (!(eta >= 0.0)) throw ContractError("soft_threshold: eta must be nonnegative");
  return m.unaryExpr([eta](double x) {
    const double mag = std::abs(x) - eta;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
  });
}

Matrix col_l21_prox(const Matrix& g, double tau) {
  if (!(tau > 0.0)) throw ContractError("col_l21_prox: tau must be positive");
  require_finite(g, "col_l21_prox input");
  Matrix e = Matrix::Zero(g.rows(), g.cols());
  for (Index i = 0; i < g.cols(); ++i) {
    const double norm = g.col(i).norm();
    if (norm > tau) e.col(i) = ((norm - tau) / norm) * g.col(i);
  }
  return e;
}

double l21_norm(const Matrix& m) { return m.colwise().norm().sum(); }

PcaResult pca_reduce(const Matrix& x, Index m) {
  require_nonempty(x, "pca_reduce");
  const Index limit = std::min(x.rows(), x.cols() - 1);
  if (m < 1 || m > limit)
    throw ContractError("pca_reduce: component count " + std::to_string(m) +
                        " outside [1, " + std::to_string(limit) + "]");
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const SvdFactors f = svd(centered);

  Matrix dirs = f.u.leftCols(m);
  for (Index j = 0; j < m; ++j) {
    Index arg = 0;
    dirs.col(j).cwiseAbs().maxCoeff(&arg);
    if (dirs(arg, j) < 0.0) dirs.col(j) = -dirs.col(j);
  }

  const double total = f.s.squaredNorm();
  const double kept = f.s.head(m).squaredNorm();
  PcaResult out;
  out.reduced = dirs.transpose() * centered;
  out.retained_variance = total > 0.0 ? std::clamp(kept / total, 0.0, 1.0) : 1.0;
  return out;
}

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw ContractError("spd_solve: incompatible shapes " + dims(a) + " and " + dims(b));
  require_finite(a, "spd_solve matrix");
  require_finite(b, "spd_solve rhs");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("spd_solve: " + dims(a) + " matrix is not positive definite");
  Matrix x = llt.solve(b);
  require_finite(x, "spd_solve result");
  return x;
}

}  // namespace elmsc::numerics
