#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/LU>

#include "isqp/errors.hpp"
#include "isqp/problem.hpp"

// Brute-force reference solvers for tiny instances. Nothing here shares code
// with the interior-point path; they exist to check it.

namespace isqp::oracle {

enum class Verdict { Optimal, Infeasible, Unbounded };

struct FeasibilityResult {
  bool feasible = false;
  Vector witness;       // vertex minimizing total violation
  double violation = 0.0;  // optimal value of the ℓ1 relaxation problem
  Vector pi;            // Farkas pair when infeasible
  Vector omega;
};

struct TinyResult {
  Verdict verdict = Verdict::Unbounded;
  Vector x;
  Vector pi;
  Vector omega;
  double objective = 0.0;
  std::optional<FeasibilityResult> feasibility;
};

namespace detail {

inline void checkTiny(const CqpProblem& prob) {
  if (prob.n > 6 || prob.m > 12 || prob.p > 3) {
    throw SizeLimit("oracle is limited to n <= 6, m <= 12, p <= 3");
  }
}

inline double tolFor(double a, double b) {
  return 1e-9 * (1.0 + std::abs(a) + std::abs(b));
}

/// Calls f on every k-subset of {0..count-1} in lexicographic order.
template <typename F>
void forEachSubset(Index count, Index k, F&& f) {
  if (k > count || k < 0) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    f(idx);
    Index pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == count - k + pos) --pos;
    if (pos < 0) return;
    ++idx[static_cast<std::size_t>(pos)];
    for (Index j = pos + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

inline double totalViolation(const CqpProblem& prob, const Vector& x) {
  const Vector ineq = prob.b - prob.A * x;
  const Vector eq = prob.C * x - prob.d;
  return ineq.cwiseMax(0.0).sum() + eq.cwiseAbs().sum();
}

/// Multipliers of the ℓ1 relaxation problem at vertex x, or nothing if the
/// bound constraints of its dual cannot be met there.
inline std::optional<std::pair<Vector, Vector>> limitDual(const CqpProblem& prob,
                                                          const Vector& x) {
  const Index n = prob.n;
  const Vector ineq = prob.b - prob.A * x;  // > 0: violated
  const Vector eq = prob.C * x - prob.d;
  Vector pi = Vector::Zero(prob.m);
  Vector omega = Vector::Zero(prob.p);
  std::vector<Index> activeIneq, activeEq;
  for (Index i = 0; i < prob.m; ++i) {
    if (ineq[i] > tolFor(prob.b[i], 0.0)) {
      pi[i] = 1.0;
    } else if (ineq[i] >= -tolFor(prob.b[i], 0.0)) {
      activeIneq.push_back(i);
    }
  }
  for (Index j = 0; j < prob.p; ++j) {
    if (eq[j] > tolFor(prob.d[j], 0.0)) {
      omega[j] = -1.0;
    } else if (eq[j] < -tolFor(prob.d[j], 0.0)) {
      omega[j] = 1.0;
    } else {
      activeEq.push_back(j);
    }
  }
  const auto na = static_cast<Index>(activeIneq.size());
  const auto ne = static_cast<Index>(activeEq.size());
  Vector known = prob.A.transpose() * pi + prob.C.transpose() * omega;
  if (na + ne > 0) {
    Eigen::MatrixXd G(n, na + ne);
    for (Index k = 0; k < na; ++k) G.col(k) = prob.A.row(activeIneq[static_cast<std::size_t>(k)]).transpose();
    for (Index k = 0; k < ne; ++k) G.col(na + k) = prob.C.row(activeEq[static_cast<std::size_t>(k)]).transpose();
    const Vector mult = G.completeOrthogonalDecomposition().solve(-known);
    for (Index k = 0; k < na; ++k) pi[activeIneq[static_cast<std::size_t>(k)]] = mult[k];
    for (Index k = 0; k < ne; ++k) omega[activeEq[static_cast<std::size_t>(k)]] = mult[na + k];
  }
  const double tol = 1e-8;
  if ((prob.A.transpose() * pi + prob.C.transpose() * omega).norm() > tol) return std::nullopt;
  for (Index i = 0; i < prob.m; ++i) {
    if (pi[i] < -tol || pi[i] > 1.0 + tol) return std::nullopt;
  }
  for (Index j = 0; j < prob.p; ++j) {
    if (std::abs(omega[j]) > 1.0 + tol) return std::nullopt;
  }
  return std::make_pair(pi, omega);
}

}  // namespace detail

/// Minimizes the total constraint violation Σ max(bᵢ − aᵢᵀx, 0) + Σ |cⱼᵀx − dⱼ|
/// by enumerating the vertices of the hyperplane arrangement. Requires [A; C]
/// to have full column rank. When the minimum is positive the dual solution
/// is an exact Farkas pair.
inline FeasibilityResult feasibilityTiny(const CqpProblem& prob) {
  detail::checkTiny(prob);
  const Index n = prob.n;
  const Index rows = prob.m + prob.p;
  RowMatrix G(rows, n);
  Vector rhs(rows);
  if (prob.m > 0) {
    G.topRows(prob.m) = prob.A;
    rhs.head(prob.m) = prob.b;
  }
  if (prob.p > 0) {
    G.bottomRows(prob.p) = prob.C;
    rhs.tail(prob.p) = prob.d;
  }

  std::vector<std::pair<double, Vector>> vertices;
  detail::forEachSubset(rows, n, [&](const std::vector<Index>& idx) {
    Eigen::MatrixXd S(n, n);
    Vector r(n);
    for (Index k = 0; k < n; ++k) {
      S.row(k) = G.row(idx[static_cast<std::size_t>(k)]);
      r[k] = rhs[idx[static_cast<std::size_t>(k)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return;
    Vector x = lu.solve(r);
    vertices.emplace_back(detail::totalViolation(prob, x), std::move(x));
  });
  if (vertices.empty()) {
    throw PreconditionError("oracle needs [A; C] with full column rank");
  }

  FeasibilityResult out;
  std::size_t best = 0;
  for (std::size_t k = 1; k < vertices.size(); ++k) {
    if (vertices[k].first < vertices[best].first - 1e-12) best = k;
  }
  out.violation = vertices[best].first;
  out.witness = vertices[best].second;
  const double scale = 1.0 + prob.b.cwiseAbs().sum() + prob.d.cwiseAbs().sum();
  out.feasible = out.violation <= 1e-9 * scale;
  if (out.feasible) return out;

  for (const auto& [value, x] : vertices) {
    if (value > out.violation + 1e-9 * scale) continue;
    if (auto dual = detail::limitDual(prob, x)) {
      out.pi = dual->first;
      out.omega = dual->second;
      return out;
    }
  }
  throw AssertionFailure("no dual solution found for the relaxation problem");
}

/// Active-set enumeration. Every subset of inequalities is tried as the
/// active set; nonsingular KKT systems whose solution is primal feasible
/// with nonnegative multipliers are candidates, and the best objective wins
/// (ties go to the first subset in bitmask order).
inline TinyResult solveTiny(const CqpProblem& prob) {
  detail::checkTiny(prob);
  TinyResult out;
  FeasibilityResult feas = feasibilityTiny(prob);
  if (!feas.feasible) {
    out.verdict = Verdict::Infeasible;
    out.feasibility = std::move(feas);
    return out;
  }
  out.feasibility = feas;

  const Index n = prob.n;
  const Index m = prob.m;
  const Index p = prob.p;
  const Eigen::MatrixXd H = prob.H.toDense();
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<Index> W;
    for (Index i = 0; i < m; ++i) {
      if (mask & (1u << i)) W.push_back(i);
    }
    const auto w = static_cast<Index>(W.size());
    if (w + p > n) continue;
    const Index size = n + w + p;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(size, size);
    Vector r(size);
    K.topLeftCorner(n, n) = H;
    r.head(n) = -prob.c;
    for (Index k = 0; k < w; ++k) {
      const auto row = prob.A.row(W[static_cast<std::size_t>(k)]);
      K.block(0, n + k, n, 1) = -row.transpose();
      K.block(n + k, 0, 1, n) = row;
      r[n + k] = prob.b[W[static_cast<std::size_t>(k)]];
    }
    for (Index k = 0; k < p; ++k) {
      K.block(0, n + w + k, n, 1) = -prob.C.row(k).transpose();
      K.block(n + w + k, 0, 1, n) = prob.C.row(k);
      r[n + w + k] = prob.d[k];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(r);
    const Vector x = sol.head(n);
    const Vector ineq = prob.A * x - prob.b;
    bool ok = true;
    for (Index i = 0; i < m && ok; ++i) {
      ok = ineq[i] >= -detail::tolFor(prob.b[i], 0.0);
    }
    for (Index k = 0; k < w && ok; ++k) ok = sol[n + k] >= -1e-9;
    if (!ok) continue;
    const double f = prob.objective(x);
    if (!found || f < best - 1e-12 * (1.0 + std::abs(best))) {
      best = f;
      found = true;
      out.x = x;
      out.pi = Vector::Zero(m);
      for (Index k = 0; k < w; ++k) out.pi[W[static_cast<std::size_t>(k)]] = sol[n + k];
      out.omega = sol.tail(p);
      out.objective = f;
    }
  }
  out.verdict = found ? Verdict::Optimal : Verdict::Unbounded;
  return out;
}

}  // namespace isqp::oracle
