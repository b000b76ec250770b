#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isqp/errors.hpp"

namespace isqp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
/// Constraint matrices are stored dense and row-major.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Objective Hessian, held either as a full symmetric matrix or as its
/// diagonal.
class Hessian {
 public:
  Hessian() = default;

  static Hessian diagonal(Vector diag) {
    Hessian h;
    h.is_diagonal_ = true;
    h.diag_ = std::move(diag);
    return h;
  }

  static Hessian dense(Eigen::MatrixXd matrix) {
    Hessian h;
    h.is_diagonal_ = false;
    h.dense_ = std::move(matrix);
    return h;
  }

  static Hessian zero(Index n) { return diagonal(Vector::Zero(n)); }

  bool isDiagonal() const { return is_diagonal_; }
  Index rows() const { return is_diagonal_ ? diag_.size() : dense_.rows(); }
  Index cols() const { return is_diagonal_ ? diag_.size() : dense_.cols(); }

  const Vector& diag() const { return diag_; }
  const Eigen::MatrixXd& denseMatrix() const { return dense_; }
  Eigen::MatrixXd& denseMatrix() { return dense_; }

  Vector apply(const Vector& x) const {
    if (is_diagonal_) return diag_.cwiseProduct(x);
    return dense_ * x;
  }

  /// xᵀHx
  double quadratic(const Vector& x) const { return x.dot(apply(x)); }

  /// M += H
  void addTo(Eigen::MatrixXd& m) const {
    if (is_diagonal_) {
      m.diagonal() += diag_;
    } else {
      m += dense_;
    }
  }

  /// Induced ∞-norm (largest absolute row sum).
  double infNorm() const {
    if (rows() == 0) return 0.0;
    if (is_diagonal_) return diag_.cwiseAbs().maxCoeff();
    return dense_.cwiseAbs().rowwise().sum().maxCoeff();
  }

  double maxAbs() const {
    if (rows() == 0) return 0.0;
    return is_diagonal_ ? diag_.cwiseAbs().maxCoeff()
                        : dense_.cwiseAbs().maxCoeff();
  }

  Eigen::MatrixXd toDense() const {
    if (!is_diagonal_) return dense_;
    return diag_.asDiagonal();
  }

 private:
  bool is_diagonal_ = true;
  Vector diag_;
  Eigen::MatrixXd dense_;
};

/// minimize ½xᵀHx + cᵀx  subject to  Ax ≥ b,  Cx = d.
struct CqpProblem {
  Index n = 0;
  Index m = 0;
  Index p = 0;
  Hessian H;
  Vector c;
  RowMatrix A;
  Vector b;
  RowMatrix C;
  Vector d;

  double objective(const Vector& x) const {
    return 0.5 * H.quadratic(x) + c.dot(x);
  }
};

/// Induced ∞-norm of a dense matrix; zero for empty matrices.
inline double infNorm(const RowMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double infNorm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

struct ValidateOptions {
  bool checkPsd = false;
};

/// Checks shapes and symmetry and returns a copy with H symmetrized.
/// Rank deficiency of C is not an error; a message is appended to `warnings`.
inline CqpProblem validate(CqpProblem problem, const ValidateOptions& opts = {},
                           std::vector<std::string>* warnings = nullptr) {
  const Index n = problem.n;
  const Index m = problem.m;
  const Index p = problem.p;
  auto mismatch = [](const std::string& what) {
    throw DimensionMismatch("dimension mismatch: " + what);
  };
  if (n <= 0 || m < 0 || p < 0) mismatch("n must be positive, m and p nonnegative");
  if (m + p == 0) mismatch("m + p must be positive");
  if (p > n) mismatch("p must not exceed n");
  if (problem.H.rows() != n || problem.H.cols() != n) mismatch("H is not n x n");
  if (problem.c.size() != n) mismatch("c does not have n entries");
  if (problem.A.rows() != m || (m > 0 && problem.A.cols() != n)) {
    mismatch("A is not m x n");
  }
  if (problem.b.size() != m) mismatch("b does not have m entries");
  if (problem.C.rows() != p || (p > 0 && problem.C.cols() != n)) {
    mismatch("C is not p x n");
  }
  if (problem.d.size() != p) mismatch("d does not have p entries");
  if (m == 0) problem.A.resize(0, n);
  if (p == 0) problem.C.resize(0, n);

  if (!problem.H.isDiagonal()) {
    auto& h = problem.H.denseMatrix();
    const double scale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
      throw AsymmetricHessian("H is not symmetric (max |H - Hᵀ| = " +
                              std::to_string(asym) + ")");
    }
    h = 0.5 * (h + h.transpose()).eval();
  }

  if (opts.checkPsd) {
    const double eps = 1e-10 * (1.0 + problem.H.maxAbs());
    Eigen::MatrixXd shifted = problem.H.toDense();
    shifted.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) {
      throw IndefiniteHessian("H + εI is not positive definite");
    }
  }

  if (p > 0 && warnings != nullptr) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(problem.C);
    const double norm = problem.C.norm();
    qr.setThreshold(norm > 0 ? 1e-10 : 0.0);
    if (norm == 0.0 || qr.rank() < p) {
      warnings->push_back("C does not have full row rank");
    }
  }
  return problem;
}

/// Positive row scales applied by normalizeRows (D1 for A, D2 for C).
struct ScalingRecord {
  Vector rowScaleIneq;
  Vector rowScaleEq;
};

namespace detail {
inline Vector reciprocalRowNorms(const RowMatrix& m) {
  Vector scale(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    scale[i] = norm > 0.0 ? 1.0 / norm : 1.0;
  }
  return scale;
}
}  // namespace detail

/// Scales each constraint row (and its right-hand side) to unit 2-norm.
/// An original dual is recovered as scale · scaled dual.
inline std::pair<CqpProblem, ScalingRecord> normalizeRows(CqpProblem problem) {
  ScalingRecord record{detail::reciprocalRowNorms(problem.A),
                       detail::reciprocalRowNorms(problem.C)};
  problem.A = record.rowScaleIneq.asDiagonal() * problem.A;
  problem.b = problem.b.cwiseProduct(record.rowScaleIneq);
  problem.C = record.rowScaleEq.asDiagonal() * problem.C;
  problem.d = problem.d.cwiseProduct(record.rowScaleEq);
  return {std::move(problem), std::move(record)};
}

/// Primal, slack and dual variables of the relaxed problem
///
///   minimize f(x) + φ·1ᵀ[z; y]
///   s.t.  Ax + z ≥ b (π),  z ≥ 0 (ξ),  Cx + y ≥ d (η),  Cx − y ≤ d (ζ).
struct AugmentedState {
  Vector x;
  Vector z;
  Vector y;
  Vector s;       // Ax + z − b
  Vector tPlus;   // Cx + y − d
  Vector tMinus;  // −Cx + y + d
  Vector pi;
  Vector xi;
  Vector eta;
  Vector zeta;

  /// Recomputes s, t₊ and t₋ from (x, z, y).
  void refreshSlacks(const CqpProblem& problem) {
    s = problem.A * x + z - problem.b;
    const Vector r = problem.C * x - problem.d;
    tPlus = r + y;
    tMinus = y - r;
  }

  bool strictlyInterior() const {
    auto positive = [](const Vector& v) {
      return v.size() == 0 || v.minCoeff() > 0.0;
    };
    return positive(s) && positive(z) && positive(tPlus) && positive(tMinus);
  }

  bool dualsNonnegative() const {
    auto nonneg = [](const Vector& v) {
      return v.size() == 0 || v.minCoeff() >= 0.0;
    };
    return nonneg(pi) && nonneg(xi) && nonneg(eta) && nonneg(zeta);
  }

  /// ‖[z; y]‖∞
  double relaxationInfNorm() const {
    return std::max(infNorm(z), infNorm(y));
  }
};

/// Builds the strictly feasible starting state for an arbitrary x0:
/// z0 = c_z·1, y0 = c_y·1 with c_z = −min{min(Ax0 − b), 0} + 1 and
/// c_y = max|Cx0 − d| + 1; all duals start at 1.
inline AugmentedState augment(const CqpProblem& problem, const Vector& x0) {
  if (x0.size() != problem.n) throw DimensionMismatch("x0 does not have n entries");
  AugmentedState st;
  st.x = x0;
  const Vector ineq = problem.A * x0 - problem.b;
  const Vector eq = problem.C * x0 - problem.d;
  const double cz =
      -std::min(ineq.size() > 0 ? ineq.minCoeff() : 0.0, 0.0) + 1.0;
  const double cy = (eq.size() > 0 ? eq.cwiseAbs().maxCoeff() : 0.0) + 1.0;
  st.z = Vector::Constant(problem.m, cz);
  st.y = Vector::Constant(problem.p, cy);
  st.refreshSlacks(problem);
  st.pi = Vector::Ones(problem.m);
  st.xi = Vector::Ones(problem.m);
  st.eta = Vector::Ones(problem.p);
  st.zeta = Vector::Ones(problem.p);
  return st;
}

/// f(x) + φ·(Σz + Σy)
inline double penaltyObjective(const CqpProblem& problem,
                               const AugmentedState& state, double phi) {
  return problem.objective(state.x) + phi * (state.z.sum() + state.y.sum());
}

/// Rounding-error bound for penaltyObjective at `state`. Differences below
/// this are noise, not increases.
inline double penaltyObjectiveNoise(const CqpProblem& problem,
                                    const AugmentedState& state, double phi) {
  const double magnitude =
      0.5 * std::abs(problem.H.quadratic(state.x)) +
      problem.c.cwiseAbs().dot(state.x.cwiseAbs()) +
      phi * (state.z.cwiseAbs().sum() + state.y.cwiseAbs().sum());
  return 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + magnitude);
}

/// Hx + c − Aᵀπ − Cᵀ(η − ζ)
inline Vector stationarityResidual(const CqpProblem& problem, const Vector& x,
                                   const Vector& pi, const Vector& eta,
                                   const Vector& zeta) {
  Vector r = problem.H.apply(x) + problem.c;
  if (problem.m > 0) r.noalias() -= problem.A.transpose() * pi;
  if (problem.p > 0) r.noalias() -= problem.C.transpose() * (eta - zeta);
  return r;
}

/// Scale-normalized optimality error of (x, π, η, ζ) for the original
/// problem. Slacks are Ax − b and ±(Cx − d), i.e. without relaxation.
inline double optimalityError(const CqpProblem& problem, const Vector& x,
                              const Vector& pi, const Vector& eta,
                              const Vector& zeta) {
  const Vector r = stationarityResidual(problem, x, pi, eta, zeta);
  double sq = r.squaredNorm();
  if (problem.m > 0) {
    const Vector s = problem.A * x - problem.b;
    sq += s.cwiseMin(pi).squaredNorm();
  }
  double denom = std::max({problem.H.infNorm(), infNorm(problem.c),
                           infNorm(problem.A)});
  if (problem.p > 0) {
    const Vector t = problem.C * x - problem.d;
    sq += t.cwiseMin(eta).squaredNorm();
    sq += (-t).cwiseMin(zeta).squaredNorm();
    denom = std::max(denom, infNorm(problem.C));
  }
  if (denom == 0.0) denom = 1.0;
  return std::sqrt(sq) / denom;
}

/// Residual blocks of the relaxed problem's optimality conditions.
struct KktResiduals {
  Vector g1;  // (Sπ, Zξ, T₊η, T₋ζ)
  Vector g2;  // (Hx + c − Aᵀπ − Cᵀ(η−ζ), π + ξ − φ1, η + ζ − φ1)
  double g3 = 0.0;

  double g1Norm() const { return g1.norm(); }
  double g2Norm() const { return g2.norm(); }
  double g3Abs() const { return std::abs(g3); }
};

inline KktResiduals kktResiduals(const CqpProblem& problem,
                                 const AugmentedState& st, double phi) {
  const Index n = problem.n;
  const Index m = problem.m;
  const Index p = problem.p;
  KktResiduals res;
  res.g1.resize(2 * m + 2 * p);
  res.g1 << st.s.cwiseProduct(st.pi), st.z.cwiseProduct(st.xi),
      st.tPlus.cwiseProduct(st.eta), st.tMinus.cwiseProduct(st.zeta);
  const Vector stat = stationarityResidual(problem, st.x, st.pi, st.eta, st.zeta);
  res.g2.resize(n + m + p);
  res.g2 << stat, (st.pi + st.xi).array() - phi,
      (st.eta + st.zeta).array() - phi;
  res.g3 = stat.dot(st.x);
  return res;
}

}  // namespace isqp
