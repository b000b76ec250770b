#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include "isqp/errors.hpp"
#include "isqp/problem.hpp"

namespace isqp {

/// Seedable generator with platform-independent output. The engine is
/// std::mt19937_64, whose sequence is fixed by the standard; uniform and
/// normal variates are derived here rather than through <random>
/// distributions, whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box–Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) %
           bound;
  }

  Vector normalVector(Index size) {
    Vector v(size);
    for (Index i = 0; i < size; ++i) v[i] = normal();
    return v;
  }

  RowMatrix normalMatrix(Index rows, Index cols) {
    RowMatrix a(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) a(i, j) = normal();
    }
    return a;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class HessianKind { StronglyConvex, Linear };

struct GenSpec {
  Index m = 0;
  Index n = 0;
  Index p = 0;
  HessianKind hessianKind = HessianKind::StronglyConvex;
  bool feasible = true;
  std::uint64_t seed = 0;
};

namespace detail {

inline Hessian randomHessian(Rng& rng, const GenSpec& spec) {
  if (spec.hessianKind == HessianKind::Linear) return Hessian::zero(spec.n);
  Vector diag(spec.n);
  for (Index i = 0; i < spec.n; ++i) diag[i] = rng.uniform();
  return Hessian::diagonal(std::move(diag));
}

inline void checkSizes(const GenSpec& spec) {
  if (spec.n <= 0 || spec.m < 0 || spec.p < 0 || spec.m + spec.p == 0 ||
      spec.p > spec.n) {
    throw PreconditionError("generator sizes must satisfy n > 0, m + p > 0, p <= n");
  }
}

}  // namespace detail

/// Strictly feasible instance: A, C, c ~ N(0,1), b = A·xFeas − sFeas with
/// sFeas ~ U(1,2), d = C·xFeas.
inline std::pair<CqpProblem, Vector> randomFeasible(const GenSpec& spec) {
  detail::checkSizes(spec);
  Rng rng(spec.seed);
  CqpProblem prob;
  prob.n = spec.n;
  prob.m = spec.m;
  prob.p = spec.p;
  prob.H = detail::randomHessian(rng, spec);
  prob.c = rng.normalVector(spec.n);
  prob.A = rng.normalMatrix(spec.m, spec.n);
  prob.C = rng.normalMatrix(spec.p, spec.n);
  Vector xFeas = rng.normalVector(spec.n);
  Vector sFeas(spec.m);
  for (Index i = 0; i < spec.m; ++i) sFeas[i] = rng.uniform(1.0, 2.0);
  prob.b = prob.A * xFeas - sFeas;
  prob.d = prob.C * xFeas;
  return {std::move(prob), std::move(xFeas)};
}

/// Infeasible instance: all data N(0,1), then the last inequality is replaced
/// by −aᵢᵀx ≥ −bᵢ + δ for a random i < m − 1 and δ ~ U(0,1).
inline CqpProblem randomInfeasible(const GenSpec& spec) {
  detail::checkSizes(spec);
  if (spec.m < 2) throw PreconditionError("infeasible instances need m >= 2");
  Rng rng(spec.seed);
  CqpProblem prob;
  prob.n = spec.n;
  prob.m = spec.m;
  prob.p = spec.p;
  prob.H = detail::randomHessian(rng, spec);
  prob.c = rng.normalVector(spec.n);
  prob.A = rng.normalMatrix(spec.m, spec.n);
  prob.b = rng.normalVector(spec.m);
  prob.C = rng.normalMatrix(spec.p, spec.n);
  prob.d = rng.normalVector(spec.p);
  const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.m - 1)));
  const double delta = rng.uniform();
  prob.A.row(spec.m - 1) = -prob.A.row(i);
  prob.b[spec.m - 1] = -prob.b[i] + delta;
  return prob;
}

struct StartPoint {
  Vector x0;
  bool infeasible = true;  // false when the resampling cap was hit
  int samples = 0;
};

/// Draws x0 ~ N(0, I) until it violates some constraint, at most 100 times.
inline StartPoint infeasibleStartPoint(const CqpProblem& problem,
                                       std::uint64_t seed) {
  if (problem.m + problem.p == 0) {
    throw PreconditionError("problem has no constraints");
  }
  Rng rng(seed);
  StartPoint sp;
  for (sp.samples = 1; sp.samples <= 100; ++sp.samples) {
    sp.x0 = rng.normalVector(problem.n);
    const Vector ineq = problem.A * sp.x0 - problem.b;
    const Vector eq = problem.C * sp.x0 - problem.d;
    const bool violates = (ineq.size() > 0 && ineq.minCoeff() < 0.0) ||
                          (eq.size() > 0 && eq.cwiseAbs().maxCoeff() > 0.0);
    if (violates) return sp;
  }
  sp.samples = 100;
  sp.infeasible = false;
  return sp;
}

/// Labelled patterns: one row of `patterns` per example, labels ±1.
struct SvmData {
  RowMatrix patterns;
  Vector labels;
};

namespace detail {
inline void checkSvm(const SvmData& data) {
  if (data.patterns.rows() != data.labels.size() || data.patterns.rows() == 0) {
    throw DimensionMismatch("SVM data needs one label per pattern");
  }
  for (Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] != 1.0 && data.labels[i] != -1.0) {
      throw PreconditionError("SVM labels must be -1 or +1");
    }
  }
}
}  // namespace detail

/// Hard-margin training QP over x = [w; β]:
/// minimize ½‖w‖² s.t. L(Pw − β1) ≥ 1.
inline CqpProblem svmProblem(const SvmData& data) {
  detail::checkSvm(data);
  const Index mbar = data.patterns.rows();
  const Index nbar = data.patterns.cols();
  CqpProblem prob;
  prob.n = nbar + 1;
  prob.m = mbar;
  prob.p = 0;
  Vector h = Vector::Ones(prob.n);
  h[nbar] = 0.0;
  prob.H = Hessian::diagonal(std::move(h));
  prob.c = Vector::Zero(prob.n);
  prob.A.resize(mbar, prob.n);
  prob.A.leftCols(nbar) = data.labels.asDiagonal() * data.patterns;
  prob.A.col(nbar) = -data.labels;
  prob.b = Vector::Ones(mbar);
  prob.C.resize(0, prob.n);
  prob.d.resize(0);
  return prob;
}

/// Soft-margin QP over x = [w; β; ν]:
/// minimize ½‖w‖² + τν s.t. L(Pw − β1) + ν1 ≥ 1, ν ≥ 0.
inline CqpProblem svmRelaxedProblem(const SvmData& data, double tau) {
  detail::checkSvm(data);
  if (!(tau > 0.0)) throw PreconditionError("tau must be positive");
  const Index mbar = data.patterns.rows();
  const Index nbar = data.patterns.cols();
  CqpProblem prob;
  prob.n = nbar + 2;
  prob.m = mbar + 1;
  prob.p = 0;
  Vector h = Vector::Zero(prob.n);
  h.head(nbar).setOnes();
  prob.H = Hessian::diagonal(std::move(h));
  prob.c = Vector::Zero(prob.n);
  prob.c[nbar + 1] = tau;
  prob.A = RowMatrix::Zero(prob.m, prob.n);
  prob.A.topLeftCorner(mbar, nbar) = data.labels.asDiagonal() * data.patterns;
  prob.A.block(0, nbar, mbar, 1) = -data.labels;
  prob.A.block(0, nbar + 1, mbar, 1).setOnes();
  prob.A(mbar, nbar + 1) = 1.0;
  prob.b = Vector::Ones(prob.m);
  prob.b[mbar] = 0.0;
  prob.C.resize(0, prob.n);
  prob.d.resize(0);
  return prob;
}

}  // namespace isqp
