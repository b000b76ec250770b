#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "isqp/problem.hpp"

// Condensed Newton system of the relaxed problem.
//
// Unknowns: Δx, Δz, Δy and the multipliers Δπ_Q, Δξ, Δη, Δζ. Slack
// directions follow from their definitions:
//
//   Δs = AΔx + Δz,   Δt₊ = CΔx + Δy,   Δt₋ = −CΔx + Δy.
//
// Linearized equations (Δπᵢ = 0 and πᵢ treated as absent for i ∉ Q):
//
//   HΔx − A_QᵀΔπ_Q − Cᵀ(Δη − Δζ) = r_x
//   −Δπᵢ − Δξᵢ = r_z,ᵢ  (i ∈ Q),        −Δξᵢ = r_z,ᵢ  (i ∉ Q)
//   −Δη − Δζ = r_y
//   πᵢΔsᵢ + sᵢΔπᵢ = r_π,ᵢ  (i ∈ Q)
//   ξΔz + zΔξ = r_ξ,   ηΔt₊ + t₊Δη = r_η,   ζΔt₋ + t₋Δζ = r_ζ
//
// With D_π = π/s, D_ξ = ξ/z, D_η = η/t₊, D_ζ = ζ/t₋ the inequality block
// eliminates (row i ∈ Q) as
//
//   g = r_z + r_π/s + r_ξ/z,   w = D_π + D_ξ
//   Δz = (g − D_π aᵢᵀΔx) / w
//   Δπ = u_π − D_A aᵢᵀΔx,  u_π = r_π/s − D_π g / w,  D_A = D_π D_ξ / w
//
// and for i ∉ Q simply Δξ = −r_z, Δz = (r_ξ + z r_z) / ξ. The equality
// block eliminates as
//
//   h = r_y + r_η/t₊ + r_ζ/t₋,   v = D_η + D_ζ,   e = D_η − D_ζ
//   Δy = (h − e CΔx) / v
//   Δη − Δζ = u_ω − D_C CΔx,  u_ω = r_η/t₊ − r_ζ/t₋ − e h / v,
//   D_C = 4 D_η D_ζ / v
//
// leaving the n×n system
//
//   (H + A_Qᵀ D_A A_Q + Cᵀ D_C C) Δx = r_x + A_Qᵀ u_π + Cᵀ u_ω.
//
// Near a degenerate solution some weights D reach 1e16 and beyond, and
// both the Cholesky factor and the products D aᵢᵀΔx lose every digit. Rows
// whose weight·‖row‖² exceeds kAugmentThreshold·(1 + max|H|) (at most 2n
// inequality rows, plus any equality rows) are then kept unreduced, with
// the multiplier step w as an unknown:
//
//   [ M₀   −G_Bᵀ        ] [Δx]   [ r_x + Σ_small gᵢ uᵢ ]
//   [ −G_B  −diag(1/D_B) ] [w ] = [ −u_B / D_B          ]
//
// where M₀ holds H and the remaining rows. For an inequality row w = Δπ,
// Δξ = −r_z − Δπ and Δz = (r_ξ − zΔξ)/ξ. For an equality row w = Δη − Δζ,
// Δη = (w − r_y)/2 and Δζ = (−r_y − w)/2. Every solve ends with up to three
// rounds of iterative refinement against the unreduced equations.

namespace isqp {

/// Right-hand side of the linearized system above.
struct NewtonRhs {
  Vector rx;      // n
  Vector rz;      // m
  Vector ry;      // p
  Vector rpi;     // m, entries outside Q ignored
  Vector rxi;     // m
  Vector reta;    // p
  Vector rzeta;   // p
};

/// Full step in every variable of the relaxed problem.
struct Direction {
  Vector x, z, y, s, tPlus, tMinus, pi, xi, eta, zeta;
};

enum class StepKind { Affine, Corrector };

struct KktWorkspace {
  explicit KktWorkspace(const CqpProblem& prob) : problem(prob) {}

  std::reference_wrapper<const CqpProblem> problem;
  std::vector<Index> Q;
  std::vector<char> inQ;  // membership mask over 0..m-1

  Vector s, z, tPlus, tMinus, pi, xi, eta, zeta;
  Vector dPi, dXi, dEta, dZeta;  // dual/slack ratios
  Vector dA;                     // |Q| combined inequality weights
  Vector dC;                     // p combined equality weights
  RowMatrix AQ;                  // rows of A in Q
  Eigen::MatrixXd M;             // condensed matrix (before perturbation)
  Eigen::LLT<Eigen::MatrixXd> llt;
  double perturbation = 0.0;     // β added to the diagonal, 0 if none

  // Rows whose weight exceeds the split threshold stay in augmented form;
  // empty unless the condensed matrix is too ill-conditioned to use alone.
  std::vector<Index> bigIneq;  // positions in Q
  std::vector<Index> bigEq;    // equality indices
  std::vector<char> isBigQ;    // over positions in Q
  std::vector<char> isBigEq;   // over equality indices
  Eigen::PartialPivLU<Eigen::MatrixXd> aug;

  bool augmented() const { return !bigIneq.empty() || !bigEq.empty(); }
};

/// Rows with weight·‖row‖² above this multiple of (1 + max|H|) are solved in
/// augmented form.
inline constexpr double kAugmentThreshold = 1e8;

namespace detail {

/// Indices of the (at most `cap`) entries of `w` above `threshold`, largest
/// first.
inline std::vector<Index> largeEntries(const Vector& w, double threshold,
                                       Index cap) {
  std::vector<Index> out;
  for (Index k = 0; k < w.size(); ++k) {
    if (w[k] > threshold) out.push_back(k);
  }
  if (static_cast<Index>(out.size()) > cap) {
    std::partial_sort(out.begin(), out.begin() + cap, out.end(),
                      [&](Index a, Index b) { return w[a] > w[b]; });
    out.resize(static_cast<std::size_t>(cap));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void addWeighted(Eigen::MatrixXd& M, const RowMatrix& rows,
                        const Vector& weights, const std::vector<char>* skip) {
  if (rows.rows() == 0) return;
  Vector w = weights;
  if (skip) {
    for (Index k = 0; k < w.size(); ++k) {
      if ((*skip)[static_cast<std::size_t>(k)]) w[k] = 0.0;
    }
  }
  const RowMatrix B = w.cwiseSqrt().asDiagonal() * rows;
  M.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
}

}  // namespace detail

/// Forms and factorizes the condensed matrix at a strictly interior state.
inline KktWorkspace assemble(const CqpProblem& problem,
                             const AugmentedState& st, std::vector<Index> Q) {
  const Index n = problem.n;
  const Index m = problem.m;
  const Index p = problem.p;
  KktWorkspace ws(problem);
  ws.Q = std::move(Q);
  ws.inQ.assign(static_cast<std::size_t>(m), 0);
  for (Index i : ws.Q) ws.inQ[static_cast<std::size_t>(i)] = 1;
  ws.s = st.s;
  ws.z = st.z;
  ws.tPlus = st.tPlus;
  ws.tMinus = st.tMinus;
  ws.pi = st.pi;
  ws.xi = st.xi;
  ws.eta = st.eta;
  ws.zeta = st.zeta;
  ws.dPi = st.pi.cwiseQuotient(st.s);
  ws.dXi = st.xi.cwiseQuotient(st.z);
  ws.dEta = st.eta.cwiseQuotient(st.tPlus);
  ws.dZeta = st.zeta.cwiseQuotient(st.tMinus);

  const Index q = static_cast<Index>(ws.Q.size());
  ws.AQ.resize(q, n);
  ws.dA.resize(q);
  for (Index k = 0; k < q; ++k) {
    const Index i = ws.Q[static_cast<std::size_t>(k)];
    ws.AQ.row(k) = problem.A.row(i);
    ws.dA[k] = ws.dPi[i] * ws.dXi[i] / (ws.dPi[i] + ws.dXi[i]);
  }
  const Vector v = ws.dEta + ws.dZeta;
  ws.dC = 4.0 * ws.dEta.cwiseProduct(ws.dZeta).cwiseQuotient(v);

  ws.M = Eigen::MatrixXd::Zero(n, n);
  problem.H.addTo(ws.M);
  detail::addWeighted(ws.M, ws.AQ, ws.dA, nullptr);
  detail::addWeighted(ws.M, problem.C, ws.dC, nullptr);
  ws.M.triangularView<Eigen::StrictlyUpper>() = ws.M.transpose();

  // Split off rows whose weight would swamp the rest of the matrix.
  const double threshold = kAugmentThreshold * (1.0 + problem.H.maxAbs());
  const Vector ineqSize =
      q > 0 ? Vector(ws.dA.cwiseProduct(ws.AQ.rowwise().squaredNorm()))
            : Vector(0);
  const Vector eqSize =
      p > 0 ? Vector(ws.dC.cwiseProduct(problem.C.rowwise().squaredNorm()))
            : Vector(0);
  ws.bigEq = detail::largeEntries(eqSize, threshold, p);
  ws.bigIneq = detail::largeEntries(ineqSize, threshold, 2 * n);
  ws.isBigQ.assign(static_cast<std::size_t>(q), 0);
  ws.isBigEq.assign(static_cast<std::size_t>(p), 0);
  for (Index k : ws.bigIneq) ws.isBigQ[static_cast<std::size_t>(k)] = 1;
  for (Index j : ws.bigEq) ws.isBigEq[static_cast<std::size_t>(j)] = 1;

  if (ws.augmented()) {
    const auto nb = static_cast<Index>(ws.bigIneq.size());
    const auto ne = static_cast<Index>(ws.bigEq.size());
    Eigen::MatrixXd M0 = Eigen::MatrixXd::Zero(n, n);
    problem.H.addTo(M0);
    detail::addWeighted(M0, ws.AQ, ws.dA, &ws.isBigQ);
    detail::addWeighted(M0, problem.C, ws.dC, &ws.isBigEq);
    M0.triangularView<Eigen::StrictlyUpper>() = M0.transpose();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + nb + ne, n + nb + ne);
    K.topLeftCorner(n, n) = M0;
    for (Index r = 0; r < nb; ++r) {
      const Index k = ws.bigIneq[static_cast<std::size_t>(r)];
      K.block(0, n + r, n, 1) = -ws.AQ.row(k).transpose();
      K.block(n + r, 0, 1, n) = -ws.AQ.row(k);
      K(n + r, n + r) = -1.0 / ws.dA[k];
    }
    for (Index r = 0; r < ne; ++r) {
      const Index j = ws.bigEq[static_cast<std::size_t>(r)];
      K.block(0, n + nb + r, n, 1) = -problem.C.row(j).transpose();
      K.block(n + nb + r, 0, 1, n) = -problem.C.row(j);
      K(n + nb + r, n + nb + r) = -1.0 / ws.dC[j];
    }
    ws.aug.compute(K);
    const double rcond = ws.aug.rcond();
    if (rcond > 1e-300 && std::isfinite(rcond)) return ws;
    ws.bigIneq.clear();
    ws.bigEq.clear();
    std::fill(ws.isBigQ.begin(), ws.isBigQ.end(), 0);
    std::fill(ws.isBigEq.begin(), ws.isBigEq.end(), 0);
  }

  ws.llt.compute(ws.M);
  if (ws.llt.info() == Eigen::Success) return ws;

  const double trace = ws.M.trace();
  double beta = 1e-10 * (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
  for (int attempt = 0; attempt < 6; ++attempt, beta *= 2.0) {
    Eigen::MatrixXd shifted = ws.M;
    shifted.diagonal().array() += beta;
    ws.llt.compute(shifted);
    if (ws.llt.info() == Eigen::Success) {
      ws.perturbation = beta;
      return ws;
    }
  }
  throw FactorizationFailure("condensed Newton matrix is numerically singular");
}

namespace detail {

inline Direction solveCondensed(const KktWorkspace& ws, const NewtonRhs& rhs) {
  const CqpProblem& problem = ws.problem.get();
  const Index n = problem.n;
  const Index m = problem.m;
  const Index p = problem.p;
  const Index q = static_cast<Index>(ws.Q.size());
  const auto nb = static_cast<Index>(ws.bigIneq.size());
  const auto ne = static_cast<Index>(ws.bigEq.size());

  // Inequality block (rows in Q).
  Vector gQ(q), uPi(q);
  for (Index k = 0; k < q; ++k) {
    const Index i = ws.Q[static_cast<std::size_t>(k)];
    const double g = rhs.rz[i] + rhs.rpi[i] / ws.s[i] + rhs.rxi[i] / ws.z[i];
    gQ[k] = g;
    uPi[k] = rhs.rpi[i] / ws.s[i] - ws.dPi[i] * g / (ws.dPi[i] + ws.dXi[i]);
  }
  // Equality block.
  const Vector v = ws.dEta + ws.dZeta;
  const Vector e = ws.dEta - ws.dZeta;
  const Vector h = rhs.ry + rhs.reta.cwiseQuotient(ws.tPlus) +
                   rhs.rzeta.cwiseQuotient(ws.tMinus);
  const Vector uOmega = rhs.reta.cwiseQuotient(ws.tPlus) -
                        rhs.rzeta.cwiseQuotient(ws.tMinus) -
                        e.cwiseProduct(h).cwiseQuotient(v);

  Vector uPiSmall = uPi;
  Vector uOmegaSmall = uOmega;
  for (Index k : ws.bigIneq) uPiSmall[k] = 0.0;
  for (Index j : ws.bigEq) uOmegaSmall[j] = 0.0;
  Vector r = rhs.rx;
  if (q > 0) r.noalias() += ws.AQ.transpose() * uPiSmall;
  if (p > 0) r.noalias() += problem.C.transpose() * uOmegaSmall;

  Direction dir;
  Vector wBig;  // multiplier steps of the augmented rows
  if (ws.augmented()) {
    Vector full(n + nb + ne);
    full.head(n) = r;
    for (Index t = 0; t < nb; ++t) {
      const Index k = ws.bigIneq[static_cast<std::size_t>(t)];
      full[n + t] = -uPi[k] / ws.dA[k];
    }
    for (Index t = 0; t < ne; ++t) {
      const Index j = ws.bigEq[static_cast<std::size_t>(t)];
      full[n + nb + t] = -uOmega[j] / ws.dC[j];
    }
    const Vector sol = ws.aug.solve(full);
    dir.x = sol.head(n);
    wBig = sol.tail(nb + ne);
  } else {
    dir.x = ws.llt.solve(r);
  }

  const Vector axQ = q > 0 ? Vector(ws.AQ * dir.x) : Vector(0);
  dir.z.resize(m);
  dir.pi = Vector::Zero(m);
  dir.xi.resize(m);
  for (Index i = 0; i < m; ++i) {
    if (ws.inQ[static_cast<std::size_t>(i)]) continue;
    dir.xi[i] = -rhs.rz[i];
    dir.z[i] = (rhs.rxi[i] - ws.z[i] * dir.xi[i]) / ws.xi[i];
  }
  for (Index k = 0; k < q; ++k) {
    const Index i = ws.Q[static_cast<std::size_t>(k)];
    const double w = ws.dPi[i] + ws.dXi[i];
    dir.z[i] = (gQ[k] - ws.dPi[i] * axQ[k]) / w;
    dir.pi[i] = uPi[k] - ws.dA[k] * axQ[k];
    // The heavier member of the pair comes from Δπ + Δξ = −r_z.
    dir.xi[i] = ws.dXi[i] > ws.dPi[i]
                    ? -rhs.rz[i] - dir.pi[i]
                    : rhs.rxi[i] / ws.z[i] - ws.dXi[i] * dir.z[i];
  }
  // Augmented rows: take Δπ from the solve and avoid the weight·aᵀΔx products.
  for (Index t = 0; t < nb; ++t) {
    const Index i = ws.Q[static_cast<std::size_t>(ws.bigIneq[static_cast<std::size_t>(t)])];
    dir.pi[i] = wBig[t];
    dir.xi[i] = -rhs.rz[i] - dir.pi[i];
    dir.z[i] = (rhs.rxi[i] - ws.z[i] * dir.xi[i]) / ws.xi[i];
  }
  // Δs on Q only; the rest is filled in by completeSlackStep.
  dir.s = Vector::Zero(m);
  for (Index k = 0; k < q; ++k) {
    const Index i = ws.Q[static_cast<std::size_t>(k)];
    dir.s[i] = axQ[k] + dir.z[i];
  }

  const Vector cx = p > 0 ? Vector(problem.C * dir.x) : Vector(0);
  dir.y = (h - e.cwiseProduct(cx)).cwiseQuotient(v);
  for (Index t = 0; t < ne; ++t) {
    const Index j = ws.bigEq[static_cast<std::size_t>(t)];
    const double omega = wBig[nb + t];
    const double dEta = 0.5 * (omega - rhs.ry[j]);
    const double dZeta = 0.5 * (-rhs.ry[j] - omega);
    const double dtp = (rhs.reta[j] - ws.tPlus[j] * dEta) / ws.eta[j];
    const double dtm = (rhs.rzeta[j] - ws.tMinus[j] * dZeta) / ws.zeta[j];
    dir.y[j] = 0.5 * (dtp + dtm);
  }
  dir.tPlus = cx + dir.y;
  dir.tMinus = dir.y - cx;
  dir.eta = rhs.reta.cwiseQuotient(ws.tPlus) - ws.dEta.cwiseProduct(dir.tPlus);
  dir.zeta =
      rhs.rzeta.cwiseQuotient(ws.tMinus) - ws.dZeta.cwiseProduct(dir.tMinus);
  for (Index j = 0; j < p; ++j) {
    if (ws.dEta[j] > ws.dZeta[j]) {
      dir.eta[j] = -rhs.ry[j] - dir.zeta[j];
    } else {
      dir.zeta[j] = -rhs.ry[j] - dir.eta[j];
    }
  }
  for (Index t = 0; t < ne; ++t) {
    const Index j = ws.bigEq[static_cast<std::size_t>(t)];
    const double omega = wBig[nb + t];
    dir.eta[j] = 0.5 * (omega - rhs.ry[j]);
    dir.zeta[j] = 0.5 * (-rhs.ry[j] - omega);
  }
  return dir;
}

/// Δs = AΔx + Δz over every row. Where a slack is smaller than its dual the
/// complementarity row gives it instead: AΔx + Δz carries absolute rounding
/// error far above a slack near zero, which would stall the step length.
inline void completeSlackStep(const KktWorkspace& ws, const NewtonRhs& rhs,
                              Direction& dir) {
  const CqpProblem& problem = ws.problem.get();
  if (problem.m > 0) dir.s.noalias() = problem.A * dir.x;
  dir.s += dir.z;
  for (Index i : ws.Q) {
    if (ws.s[i] < ws.pi[i]) dir.s[i] = (rhs.rpi[i] - ws.s[i] * dir.pi[i]) / ws.pi[i];
  }
  for (Index j = 0; j < problem.p; ++j) {
    if (ws.tPlus[j] < ws.eta[j]) {
      dir.tPlus[j] = (rhs.reta[j] - ws.tPlus[j] * dir.eta[j]) / ws.eta[j];
    }
    if (ws.tMinus[j] < ws.zeta[j]) {
      dir.tMinus[j] = (rhs.rzeta[j] - ws.tMinus[j] * dir.zeta[j]) / ws.zeta[j];
    }
  }
}

/// rhs minus the left-hand side of the unreduced equations at `dir`. Only
/// the Q rows of Δs are read.
inline NewtonRhs residualOf(const KktWorkspace& ws, const NewtonRhs& rhs,
                            const Direction& dir) {
  const CqpProblem& problem = ws.problem.get();
  NewtonRhs e;
  e.rx = rhs.rx - problem.H.apply(dir.x);
  if (!ws.Q.empty()) {
    Vector piQ(static_cast<Index>(ws.Q.size()));
    for (std::size_t k = 0; k < ws.Q.size(); ++k) piQ[static_cast<Index>(k)] = dir.pi[ws.Q[k]];
    e.rx.noalias() += ws.AQ.transpose() * piQ;
  }
  if (problem.p > 0) e.rx.noalias() += problem.C.transpose() * (dir.eta - dir.zeta);
  e.rz = rhs.rz + dir.pi + dir.xi;
  e.ry = rhs.ry + dir.eta + dir.zeta;
  e.rpi = Vector::Zero(problem.m);
  for (Index i : ws.Q) {
    e.rpi[i] = rhs.rpi[i] - ws.pi[i] * dir.s[i] - ws.s[i] * dir.pi[i];
  }
  e.rxi = rhs.rxi - ws.xi.cwiseProduct(dir.z) - ws.z.cwiseProduct(dir.xi);
  e.reta = rhs.reta - ws.eta.cwiseProduct(dir.tPlus) -
           ws.tPlus.cwiseProduct(dir.eta);
  e.rzeta = rhs.rzeta - ws.zeta.cwiseProduct(dir.tMinus) -
            ws.tMinus.cwiseProduct(dir.zeta);
  return e;
}

inline double norm(const NewtonRhs& r) {
  return std::sqrt(r.rx.squaredNorm() + r.rz.squaredNorm() +
                   r.ry.squaredNorm() + r.rpi.squaredNorm() +
                   r.rxi.squaredNorm() + r.reta.squaredNorm() +
                   r.rzeta.squaredNorm());
}

inline void add(Direction& d, const Direction& c) {
  d.x += c.x;
  d.z += c.z;
  d.y += c.y;
  d.s += c.s;
  d.tPlus += c.tPlus;
  d.tMinus += c.tMinus;
  d.pi += c.pi;
  d.xi += c.xi;
  d.eta += c.eta;
  d.zeta += c.zeta;
}

}  // namespace detail

/// Solves the linearized system for `rhs` and recovers every eliminated
/// block, followed by up to `refinements` rounds of iterative refinement on
/// the unreduced equations. `kind` only documents the caller's intent; both
/// kinds share one factorization.
inline Direction solveStep(const KktWorkspace& ws, const NewtonRhs& rhs,
                           StepKind kind = StepKind::Affine,
                           int refinements = 3) {
  (void)kind;
  Direction dir = detail::solveCondensed(ws, rhs);
  NewtonRhs res = detail::residualOf(ws, rhs, dir);
  double resNorm = detail::norm(res);
  for (int k = 0; k < refinements && resNorm > 0.0; ++k) {
    Direction trial = dir;
    detail::add(trial, detail::solveCondensed(ws, res));
    NewtonRhs trialRes = detail::residualOf(ws, rhs, trial);
    const double trialNorm = detail::norm(trialRes);
    if (!(trialNorm < resNorm)) break;
    dir = std::move(trial);
    res = std::move(trialRes);
    resNorm = trialNorm;
  }
  detail::completeSlackStep(ws, rhs, dir);
  return dir;
}

/// Right-hand side of the pure Newton (affine-scaling) step at fixed φ.
inline NewtonRhs affineRhs(const CqpProblem& problem, const AugmentedState& st,
                           double phi, const std::vector<char>& inQ) {
  const Index m = problem.m;
  Vector piQ = st.pi;
  for (Index i = 0; i < m; ++i) {
    if (!inQ[static_cast<std::size_t>(i)]) piQ[i] = 0.0;
  }
  NewtonRhs rhs;
  rhs.rx = -stationarityResidual(problem, st.x, piQ, st.eta, st.zeta);
  rhs.rz = (piQ + st.xi).array() - phi;
  rhs.ry = (st.eta + st.zeta).array() - phi;
  rhs.rpi = -st.s.cwiseProduct(piQ);
  rhs.rxi = -st.z.cwiseProduct(st.xi);
  rhs.reta = -st.tPlus.cwiseProduct(st.eta);
  rhs.rzeta = -st.tMinus.cwiseProduct(st.zeta);
  return rhs;
}

}  // namespace isqp
