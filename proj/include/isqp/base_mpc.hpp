#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "isqp/kkt.hpp"
#include "isqp/problem.hpp"

namespace isqp {

struct BaseIterationOptions {
  bool constraintReduction = true;
  /// Initial slack threshold δ̄.
  double deltaBar = 1.0;
  /// Minimum reduced-set size; negative means 3n.
  Index qmin = -1;
  int maxBacktracks = 20;
};

/// Internal state of the base iteration. Reset whenever φ increases.
struct BaseIterationVars {
  double deltaBar = 1.0;
  double delta = 1.0;
  int iteration = 0;
  double lastMu = std::numeric_limits<double>::infinity();
  std::vector<double> muHistory;

  explicit BaseIterationVars(double delta_bar = 1.0)
      : deltaBar(delta_bar), delta(delta_bar) {}

  void reset() {
    delta = deltaBar;
    iteration = 0;
    lastMu = std::numeric_limits<double>::infinity();
    muHistory.clear();
  }
};

/// (sᵀπ + zᵀξ + t₊ᵀη + t₋ᵀζ) / (2m + 2p)
inline double dualityMeasure(const AugmentedState& st) {
  const double total = st.s.dot(st.pi) + st.z.dot(st.xi) +
                       st.tPlus.dot(st.eta) + st.tMinus.dot(st.zeta);
  const Index count = st.s.size() + st.z.size() + st.tPlus.size() +
                      st.tMinus.size();
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

inline std::vector<Index> allConstraints(Index m) {
  std::vector<Index> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

/// Reduced inequality set: every row with sᵢ ≤ δ, padded with the smallest
/// remaining slacks up to max(n + 1, qmin) rows. The z ≥ 0 and equality
/// families are never reduced and are not part of the returned set.
inline std::vector<Index> selectConstraints(const AugmentedState& st,
                                            BaseIterationVars& vars, Index n,
                                            const BaseIterationOptions& opts = {}) {
  const Index m = st.s.size();
  if (!opts.constraintReduction) return allConstraints(m);

  if (vars.iteration < 5) {
    vars.delta = vars.deltaBar;
  } else {
    vars.delta = std::max(vars.deltaBar * std::min(1.0, vars.lastMu), 1e-12);
  }
  const Index qmin = opts.qmin < 0 ? 3 * n : opts.qmin;
  const Index target = std::min(m, std::max(n + 1, qmin));

  std::vector<Index> order = allConstraints(m);
  const auto by_slack = [&](Index a, Index b) {
    return st.s[a] < st.s[b] || (st.s[a] == st.s[b] && a < b);
  };
  const auto below = static_cast<Index>(
      std::count_if(order.begin(), order.end(),
                    [&](Index i) { return st.s[i] <= vars.delta; }));
  const Index keep = std::max(below, target);
  if (keep < m) {
    std::nth_element(order.begin(), order.begin() + keep, order.end(), by_slack);
    order.resize(static_cast<std::size_t>(keep));
  }
  std::sort(order.begin(), order.end());
  return order;
}

struct StepResult {
  AugmentedState state;
  bool accepted = true;
  std::vector<Index> Q;
  double alphaPrimal = 0.0;
  double alphaDual = 0.0;
  double sigma = 0.0;
  double mu = 0.0;  // reduced duality measure after the step
  int backtracks = 0;
  double gamma = 1.0;  // weight of the corrector part actually used
};

namespace detail {

/// Largest α ≤ +∞ with v + αΔv ≥ 0.
inline double maxStep(const Vector& v, const Vector& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

inline double maxStepMasked(const Vector& v, const Vector& dv,
                            const std::vector<Index>& Q) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Index i : Q) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

inline double primalMaxStep(const AugmentedState& st, const Direction& d) {
  return std::min({maxStep(st.s, d.s), maxStep(st.z, d.z),
                   maxStep(st.tPlus, d.tPlus), maxStep(st.tMinus, d.tMinus)});
}

inline double dualMaxStep(const AugmentedState& st, const Direction& d,
                          const std::vector<Index>& Q) {
  return std::min({maxStepMasked(st.pi, d.pi, Q), maxStep(st.xi, d.xi),
                   maxStep(st.eta, d.eta), maxStep(st.zeta, d.zeta)});
}

/// Complementarity average over the reduced set and the unreduced families,
/// after steps (αp, αd) along d.
inline double reducedMu(const AugmentedState& st, const Direction* d,
                        const std::vector<Index>& Q, double ap, double ad) {
  double total = 0.0;
  for (Index i : Q) {
    const double s = st.s[i] + (d ? ap * d->s[i] : 0.0);
    const double pi = st.pi[i] + (d ? ad * d->pi[i] : 0.0);
    total += s * pi;
  }
  auto add = [&](const Vector& v, const Vector& lam, const Vector* dv,
                 const Vector* dlam) {
    for (Index i = 0; i < v.size(); ++i) {
      total += (v[i] + (dv ? ap * (*dv)[i] : 0.0)) *
               (lam[i] + (dlam ? ad * (*dlam)[i] : 0.0));
    }
  };
  add(st.z, st.xi, d ? &d->z : nullptr, d ? &d->xi : nullptr);
  add(st.tPlus, st.eta, d ? &d->tPlus : nullptr, d ? &d->eta : nullptr);
  add(st.tMinus, st.zeta, d ? &d->tMinus : nullptr, d ? &d->zeta : nullptr);
  const auto count = static_cast<double>(Q.size()) +
                     static_cast<double>(st.z.size() + 2 * st.y.size());
  return count > 0 ? total / count : 0.0;
}

/// a + γ(b − a), componentwise over every block.
inline Direction blend(const Direction& a, const Direction& b, double gamma) {
  const auto mix = [gamma](const Vector& u, const Vector& v) -> Vector {
    return u + gamma * (v - u);
  };
  return {mix(a.x, b.x),         mix(a.z, b.z),     mix(a.y, b.y),
          mix(a.s, b.s),         mix(a.tPlus, b.tPlus),
          mix(a.tMinus, b.tMinus), mix(a.pi, b.pi), mix(a.xi, b.xi),
          mix(a.eta, b.eta),     mix(a.zeta, b.zeta)};
}

}  // namespace detail

/// One predictor-corrector iteration on the relaxed problem at fixed φ.
///
/// The primal step never increases f(x) + φ·1ᵀ[z; y]: the corrector part of
/// the combined direction is scaled back so the slope stays at most half the
/// affine-scaling slope, and the step is halved until the objective does not
/// increase. When that fails the
/// primal variables stay put, only the duals move, and `accepted` is false.
inline StepResult step(const CqpProblem& problem, const AugmentedState& st,
                       double phi, BaseIterationVars& vars,
                       const BaseIterationOptions& opts = {}) {
  const Index m = problem.m;
  StepResult out;
  out.Q = selectConstraints(st, vars, problem.n, opts);
  const KktWorkspace ws = assemble(problem, st, out.Q);

  const double mu = detail::reducedMu(st, nullptr, out.Q, 0.0, 0.0);

  // Predictor.
  const NewtonRhs aff = affineRhs(problem, st, phi, ws.inQ);
  const Direction da = solveStep(ws, aff, StepKind::Affine);
  const double apAff = std::min(1.0, detail::primalMaxStep(st, da));
  const double adAff = std::min(1.0, detail::dualMaxStep(st, da, out.Q));
  const double muAff = detail::reducedMu(st, &da, out.Q, apAff, adAff);
  const double ratio = mu > 0.0 ? std::clamp(muAff / mu, 0.0, 1.0) : 0.0;
  out.sigma = ratio * ratio * ratio;

  // Corrector, solved directly for the combined direction.
  NewtonRhs cor = aff;
  const double target = out.sigma * mu;
  for (Index i : out.Q) {
    cor.rpi[i] += target - da.s[i] * da.pi[i];
  }
  cor.rxi.array() += target - da.z.cwiseProduct(da.xi).array();
  cor.reta.array() += target - da.tPlus.cwiseProduct(da.eta).array();
  cor.rzeta.array() += target - da.tMinus.cwiseProduct(da.zeta).array();
  Direction dir = solveStep(ws, cor, StepKind::Corrector);

  const Vector grad = problem.H.apply(st.x) + problem.c;
  const auto slope = [&](const Direction& d) {
    return grad.dot(d.x) + phi * (d.z.sum() + d.y.sum());
  };
  const double slopeAff = slope(da);
  const double slopeCor = slope(dir) - slopeAff;
  if (slopeAff < 0.0 && slopeCor > -0.5 * slopeAff) {
    out.gamma = -0.5 * slopeAff / slopeCor;
    dir = detail::blend(da, dir, out.gamma);
  } else if (slopeAff >= 0.0 && slopeCor > 0.0) {
    out.gamma = 0.0;
    dir = da;
  }

  const double tau =
      std::min(std::max(0.995, 1.0 - mu), 1.0 - 1e-12);
  double ap = std::min(1.0, tau * detail::primalMaxStep(st, dir));
  double ad = std::min(1.0, tau * detail::dualMaxStep(st, dir, out.Q));
  // With curvature, unequal steps leave (αp − αd)·HΔx in the stationarity
  // residual, so quadratic problems take one common step.
  const bool coupled = problem.H.maxAbs() > 0.0;
  if (coupled) ap = ad = std::min(ap, ad);

  const double fOld = penaltyObjective(problem, st, phi) +
                      penaltyObjectiveNoise(problem, st, phi);
  AugmentedState next = st;
  out.accepted = false;
  for (int bt = 0; bt <= opts.maxBacktracks; ++bt) {
    next.x = st.x + ap * dir.x;
    next.z = st.z + ap * dir.z;
    next.y = st.y + ap * dir.y;
    if (penaltyObjective(problem, next, phi) <= fOld) {
      // Slacks follow the direction; recomputing them from x loses the
      // small ones to cancellation.
      next.s = st.s + ap * dir.s;
      next.tPlus = st.tPlus + ap * dir.tPlus;
      next.tMinus = st.tMinus + ap * dir.tMinus;
      if (next.strictlyInterior()) {
        out.accepted = true;
        break;
      }
    }
    out.backtracks = bt + 1;
    ap *= 0.5;
  }
  if (!out.accepted) {
    ap = 0.0;
    next.x = st.x;
    next.z = st.z;
    next.y = st.y;
    next.s = st.s;
    next.tPlus = st.tPlus;
    next.tMinus = st.tMinus;
  }

  if (coupled && out.accepted) ad = std::min(ad, ap);
  for (Index i : out.Q) next.pi[i] = std::max(st.pi[i] + ad * dir.pi[i], 0.0);
  next.xi = (st.xi + ad * dir.xi).cwiseMax(0.0);
  next.eta = (st.eta + ad * dir.eta).cwiseMax(0.0);
  next.zeta = (st.zeta + ad * dir.zeta).cwiseMax(0.0);

  out.mu = detail::reducedMu(next, nullptr, out.Q, 0.0, 0.0);
  if (out.Q.size() < static_cast<std::size_t>(m)) {
    for (Index i = 0; i < m; ++i) {
      // Capped at φ: π + ξ = φ with ξ ≥ 0 bounds every multiplier.
      if (!ws.inQ[static_cast<std::size_t>(i)]) {
        next.pi[i] = std::min(out.mu / next.s[i], phi);
      }
    }
  }

  if (!out.accepted && !(out.mu < mu)) {
    throw StallError("base iteration stalled: no objective decrease and no "
                     "duality-measure decrease");
  }

  out.alphaPrimal = ap;
  out.alphaDual = ad;
  vars.lastMu = out.mu;
  vars.muHistory.push_back(out.mu);
  ++vars.iteration;
  out.state = std::move(next);
  return out;
}

}  // namespace isqp
