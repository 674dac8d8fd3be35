#include "elmsc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "elmsc/errors.hpp"
#include "elmsc/rng.hpp"

namespace elmsc::solver {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void require_square_blocks(const Matrix& m, Index views, Index samples, const char* what) {
  if (views < 1 || samples < 1 || m.rows() != m.cols() || m.rows() != views * samples) {
    std::ostringstream os;
    os << what << ": expected a " << views * samples << "x" << views * samples
       << " matrix of " << views << "x" << views << " blocks, got " << m.rows() << "x" << m.cols();
    throw ContractError(os.str());
  }
}

Matrix symmetric_from_lower(const Matrix& m) { return m.selfadjointView<Eigen::Lower>(); }

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_sparsity: return "v1";
    case Ablation::zero_offdiag_blocks: return "v2";
  }
  return "full";
}

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "v1" || name == "no-sparsity") return Ablation::no_sparsity;
  if (name == "v2" || name == "zero-offdiag-blocks") return Ablation::zero_offdiag_blocks;
  throw ConfigError("unknown ablation '" + name + "' (expected full, v1 or v2)");
}

void ElmscConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
  if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
  if (!(mu0 > 0.0)) throw ConfigError("mu0 must be positive");
  if (!(mu0 < mu_max)) throw ConfigError("mu0 must be below mu_max");
  if (!(rho > 1.0)) throw ConfigError("rho must exceed 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be positive");
}

std::string ConvergenceTrace::to_csv() const {
  std::string out = "iter,r1,r2,r3,objective,mu\n";
  char buf[192];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.residuals.r1,
                  r.residuals.r2, r.residuals.r3, r.objective, r.mu);
    out += buf;
  }
  return out;
}

double KktReport::max_gap() const { return std::max({primal_x, primal_h, primal_j, dual_e, dual_j}); }

AdmmState init_state(const Matrix& xa, const ElmscConfig& cfg) {
  cfg.validate();
  const Index d = xa.rows();
  const Index cols = xa.cols();
  const Index k = cfg.latent_dim;
  if (k > d)
    throw ConfigError("latent_dim " + std::to_string(k) + " exceeds the feature dimension " +
                      std::to_string(d));
  Rng rng(cfg.seed);
  AdmmState s;
  s.h = rng.gaussian_matrix(k, cols);
  s.p = Matrix::Zero(d, k);
  s.z = Matrix::Zero(cols, cols);
  s.j = Matrix::Zero(cols, cols);
  s.e1 = Matrix::Zero(d, cols);
  s.e2 = Matrix::Zero(k, cols);
  s.y1 = Matrix::Zero(d, cols);
  s.y2 = Matrix::Zero(k, cols);
  s.y3 = Matrix::Zero(cols, cols);
  s.mu = cfg.mu0;
  s.iter = 0;
  return s;
}

Matrix update_p(const AdmmState& s, const Matrix& xa) {
  const Matrix target = xa + s.y1 / s.mu - s.e1;
  const Matrix k = s.h * target.transpose();
  return numerics::orthogonal_procrustes(k).transpose();
}

Matrix update_h(const AdmmState& s, const Matrix& xa) {
  const Index cols = s.z.rows();
  const Index k = s.p.cols();
  const Matrix pt = s.p.transpose();
  const Matrix ptp = pt * s.p;

  Matrix c = pt * s.y1 + s.y2 * s.z.transpose() - s.y2;
  c.noalias() += s.mu * (pt * (xa - s.e1));
  c += s.mu * s.e2;
  c.noalias() -= s.mu * (s.e2 * s.z.transpose());

  const Matrix i_minus_z = Matrix::Identity(cols, cols) - s.z;
  const bool orthonormal = (ptp - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-8;
  if (orthonormal) {
    // H (mu I + B) = C with mu I + B symmetric positive definite.
    Matrix m = Matrix::Identity(cols, cols) * s.mu;
    m.selfadjointView<Eigen::Lower>().rankUpdate(i_minus_z, s.mu);
    return numerics::spd_solve(symmetric_from_lower(m), c.transpose()).transpose();
  }
  Matrix b = Matrix::Zero(cols, cols);
  b.selfadjointView<Eigen::Lower>().rankUpdate(i_minus_z, s.mu);
  return numerics::solve_sylvester(s.mu * ptp, symmetric_from_lower(b), c);
}

Matrix update_z(const AdmmState& s) {
  const Index cols = s.h.cols();
  const Index k = s.h.rows();
  // Right-hand side J + Y3/mu + H^T (H - E2 + Y2/mu).
  Matrix rhs = s.j + s.y3 / s.mu;
  const Matrix inner = s.h - s.e2 + s.y2 / s.mu;
  rhs.noalias() += s.h.transpose() * inner;

  if (k < cols) {
    // (I + H^T H)^{-1} R = R - H^T (I_k + H H^T)^{-1} H R.
    Matrix small = Matrix::Identity(k, k);
    small.selfadjointView<Eigen::Lower>().rankUpdate(s.h);
    const Matrix hr = s.h * rhs;
    Matrix z = rhs;
    z.noalias() -= s.h.transpose() * numerics::spd_solve(symmetric_from_lower(small), hr);
    return z;
  }
  Matrix gram = Matrix::Identity(cols, cols);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(s.h.transpose());
  return numerics::spd_solve(symmetric_from_lower(gram), rhs);
}

ErrorBlocks update_e(const AdmmState& s, const Matrix& xa) {
  const Index d = xa.rows();
  const Index k = s.h.rows();
  Matrix g(d + k, xa.cols());
  g.topRows(d) = xa - s.p * s.h + s.y1 / s.mu;
  g.bottomRows(k) = s.h - s.h * s.z + s.y2 / s.mu;
  const Matrix e = numerics::col_l21_prox(g, 1.0 / s.mu);
  return {e.topRows(d), e.bottomRows(k)};
}

Matrix offdiag_blocks(const Matrix& m, Index views, Index samples) {
  require_square_blocks(m, views, samples, "offdiag_blocks");
  Matrix out = m;
  for (Index b = 0; b < views; ++b)
    out.block(b * samples, b * samples, samples, samples).setZero();
  return out;
}

Matrix update_j(const AdmmState& s, double lambda, Index views, Index samples) {
  require_square_blocks(s.z, views, samples, "update_j");
  const Matrix m = s.z - s.y3 / s.mu;
  if (lambda == 0.0) return m;
  Matrix j = numerics::soft_threshold(offdiag_blocks(m, views, samples), lambda / s.mu);
  for (Index b = 0; b < views; ++b)
    j.block(b * samples, b * samples, samples, samples) =
        m.block(b * samples, b * samples, samples, samples);
  return j;
}

AdmmState update_multipliers(AdmmState s, const Matrix& xa, const ElmscConfig& cfg) {
  s.y1 += s.mu * (xa - s.p * s.h - s.e1);
  s.y2 += s.mu * (s.h - s.h * s.z - s.e2);
  s.y3 += s.mu * (s.j - s.z);
  s.mu = std::min(cfg.rho * s.mu, cfg.mu_max);
  return s;
}

Residuals residuals(const AdmmState& s, const Matrix& xa) {
  Residuals r;
  r.r1 = max_abs(xa - s.p * s.h - s.e1);
  r.r2 = max_abs(s.h - s.h * s.z - s.e2);
  r.r3 = max_abs(s.j - s.z);
  return r;
}

double objective(const AdmmState& s, double lambda, Index views, Index samples) {
  const double err =
      (s.e1.colwise().squaredNorm() + s.e2.colwise().squaredNorm()).array().sqrt().sum();
  if (lambda == 0.0) return err;
  return err + lambda * offdiag_blocks(s.z, views, samples).cwiseAbs().sum();
}

KktReport kkt_residuals(const AdmmState& s, const Matrix& xa, double lambda, Index views,
                        Index samples) {
  require_square_blocks(s.j, views, samples, "kkt_residuals");
  const Residuals r = residuals(s, xa);
  KktReport out{r.r1, r.r2, r.r3, 0.0, 0.0};

  // Stationarity in E: [Y1; Y2] lies in the l2,1 subdifferential at E, i.e.
  // column e/||e|| when e != 0, otherwise any column of norm <= 1.
  for (Index i = 0; i < xa.cols(); ++i) {
    const double e_norm =
        std::sqrt(s.e1.col(i).squaredNorm() + s.e2.col(i).squaredNorm());
    double gap = 0.0;
    if (e_norm > 0.0) {
      gap = std::sqrt((s.y1.col(i) - s.e1.col(i) / e_norm).squaredNorm() +
                      (s.y2.col(i) - s.e2.col(i) / e_norm).squaredNorm());
    } else {
      const double y_norm = std::sqrt(s.y1.col(i).squaredNorm() + s.y2.col(i).squaredNorm());
      gap = std::max(0.0, y_norm - 1.0);
    }
    out.dual_e = std::max(out.dual_e, gap);
  }

  // Stationarity in J: -Y3 lies in lambda times the l1 subdifferential of the
  // off-diagonal blocks; the diagonal blocks carry no penalty, so -Y3 = 0 there.
  for (Index col = 0; col < s.j.cols(); ++col) {
    for (Index row = 0; row < s.j.rows(); ++row) {
      const double y = -s.y3(row, col);
      const double x = s.j(row, col);
      double gap;
      if (row / samples == col / samples)
        gap = std::abs(y);
      else if (x != 0.0)
        gap = std::abs(y - std::copysign(lambda, x));
      else
        gap = std::max(0.0, std::abs(y) - lambda);
      out.dual_j = std::max(out.dual_j, gap);
    }
  }
  return out;
}

SolverOutput run(const dataset::AugmentedMatrix& aug, const ElmscConfig& cfg) {
  cfg.validate();
  const Index views = aug.view_count();
  const Index samples = aug.samples;
  if (views < 1 || aug.xa.cols() != views * samples)
    throw ContractError("run: augmented matrix has inconsistent block layout");

  Matrix xa = aug.xa;
  if (cfg.ablation == Ablation::zero_offdiag_blocks) {
    for (Index p = 0; p < views; ++p)
      for (Index q = 0; q < views; ++q)
        if (p != q)
          xa.block(aug.block_rows[p], aug.block_cols[q], aug.block_height(p), samples).setZero();
  }
  const double lambda = cfg.effective_lambda();

  AdmmState s = init_state(xa, cfg);
  SolverOutput out;
  Residuals r{};
  bool converged = false;
  while (!converged && s.iter < cfg.max_iter) {
    try {
      s.p = update_p(s, xa);
      s.h = update_h(s, xa);
      s.z = update_z(s);
      ErrorBlocks e = update_e(s, xa);
      s.e1 = std::move(e.e1);
      s.e2 = std::move(e.e2);
      s.j = update_j(s, lambda, views, samples);
      s = update_multipliers(std::move(s), xa, cfg);
    } catch (const NumericalError& err) {
      throw NumericalError("iteration " + std::to_string(s.iter + 1) + ": " + err.what());
    }
    r = residuals(s, xa);
    ++s.iter;
    out.trace.records.push_back({s.iter, r, objective(s, lambda, views, samples), s.mu});
    converged = r.below(cfg.tol);
  }

  out.converged = converged;
  out.kkt = kkt_residuals(s, xa, lambda, views, samples);
  out.z = s.z;
  out.h = s.h;
  out.p = s.p;
  out.e.resize(s.e1.rows() + s.e2.rows(), s.e1.cols());
  out.e << s.e1, s.e2;
  out.state = std::move(s);
  return out;
}

Matrix aggregate_z(const Matrix& z, Index views, Index samples) {
  require_square_blocks(z, views, samples, "aggregate_z");
  Matrix sum = Matrix::Zero(samples, samples);
  for (Index i = 0; i < views; ++i)
    for (Index j = 0; j < views; ++j) sum += z.block(i * samples, j * samples, samples, samples);
  return sum;
}

}  // namespace elmsc::solver
