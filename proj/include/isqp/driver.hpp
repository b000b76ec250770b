#pragma once

#include <chrono>
#include <cstdint>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isqp/base_mpc.hpp"
#include "isqp/penalty.hpp"
#include "isqp/problem.hpp"

namespace isqp {

struct SolveOptions {
  double tol = 1e-8;
  double tolInfeas = 1e-6;
  int maxIter = 300;
  double phi0 = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 10.0;
  bool constraintReduction = true;
  bool normalize = true;
  std::optional<std::uint64_t> seed;
  BaseIterationOptions base{};
};

enum class SolveStatus { Optimal, Infeasible, IterationLimit, Failed };

inline const char* toString(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::IterationLimit:
      return "iteration_limit";
    case SolveStatus::Failed:
      return "failed";
  }
  return "unknown";
}

/// Approximate Farkas pair: π̂ ≥ 0 with Aᵀπ̂ + Cᵀω̂ ≈ 0 and bᵀπ̂ + dᵀω̂ > 0.
struct FarkasCertificate {
  Vector piHat;
  Vector omegaHat;
  double gain = 0.0;      // bᵀπ̂ + dᵀω̂
  double residual = 0.0;  // ‖[Aᵀπ̂ + Cᵀω̂; min{π̂, 0}]‖₂ / max{‖A‖∞, ‖C‖∞}
  bool valid = false;
};

/// Relaxed data for which the stopping iterate is feasible:
/// Ax ≥ bPrime and −dMinusShift ≤ Cx − d ≤ dPlusShift.
struct RelaxationResult {
  Vector bPrime;
  Vector dPlusShift;
  Vector dMinusShift;
  Vector xFeasible;
};

struct TraceRow {
  int iter = 0;
  double phi = 0.0;
  double mu = 0.0;
  double err = 0.0;
  Index qSize = 0;
  double obj = 0.0;
  double penaltyObj = 0.0;
  double zInfNorm = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::IterationLimit;
  Vector x, z, y, pi, xi, eta, zeta;
  int iterations = 0;
  double phiFinal = 0.0;
  int phiIncreases = 0;
  double err = std::numeric_limits<double>::infinity();
  double objective = 0.0;
  std::optional<FarkasCertificate> certificate;
  std::optional<RelaxationResult> relaxation;
  double solveTimeMs = 0.0;
  std::vector<TraceRow> trace;
  std::string diagnostic;
  std::vector<std::string> warnings;

  // Run-time checks of the framework's invariants.
  int monotoneViolations = 0;  // penalty objective rose between updates
  int interiorViolations = 0;  // a step left the strict interior
  int rejectedSteps = 0;       // backtracking exhausted

  double timePerIterationMs() const {
    return iterations > 0 ? solveTimeMs / iterations : 0.0;
  }
};

namespace detail {

/// Orthogonal projection of v onto the null space of Kᵀ, with K given by
/// rows. Rank decisions use a relative tolerance of 1e-10.
inline Vector projectOntoNullOfTranspose(const Eigen::MatrixXd& K,
                                         const Vector& v) {
  if (K.rows() == 0) return v;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(K);
  qr.setThreshold(1e-10);
  const Index r = qr.rank();
  Vector w = qr.householderQ().adjoint() * v;
  w.head(r).setZero();
  return qr.householderQ() * w;
}

}  // namespace detail

/// Candidate infeasibility certificate from the scaled multipliers
/// [π_Q/φ; (η − ζ)/φ] projected onto null([A_Qᵀ, Cᵀ]); π̂ is clamped at zero
/// and vanishes outside Q.
inline FarkasCertificate certificateCandidate(const CqpProblem& problem,
                                              const AugmentedState& st,
                                              double phi,
                                              const std::vector<Index>& Q,
                                              double tolInfeas = 1e-6) {
  const Index n = problem.n;
  const Index p = problem.p;
  const Index q = static_cast<Index>(Q.size());
  Eigen::MatrixXd K(q + p, n);
  Vector v(q + p);
  for (Index k = 0; k < q; ++k) {
    const Index i = Q[static_cast<std::size_t>(k)];
    K.row(k) = problem.A.row(i);
    v[k] = st.pi[i] / phi;
  }
  if (p > 0) {
    K.bottomRows(p) = problem.C;
    v.tail(p) = (st.eta - st.zeta) / phi;
  }
  const Vector proj = detail::projectOntoNullOfTranspose(K, v);

  FarkasCertificate cert;
  cert.piHat = Vector::Zero(problem.m);
  for (Index k = 0; k < q; ++k) {
    cert.piHat[Q[static_cast<std::size_t>(k)]] = std::max(proj[k], 0.0);
  }
  cert.omegaHat = proj.tail(p);
  cert.gain = problem.b.dot(cert.piHat) + problem.d.dot(cert.omegaHat);
  Vector r = Vector::Zero(n);
  if (problem.m > 0) r.noalias() += problem.A.transpose() * cert.piHat;
  if (p > 0) r.noalias() += problem.C.transpose() * cert.omegaHat;
  const double neg = cert.piHat.cwiseMin(0.0).squaredNorm();
  double denom = std::max(infNorm(problem.A), infNorm(problem.C));
  if (denom == 0.0) denom = 1.0;
  cert.residual = std::sqrt(r.squaredNorm() + neg) / denom;
  const double threshold =
      std::sqrt(std::numeric_limits<double>::epsilon());
  cert.valid = cert.gain > threshold && cert.residual <= tolInfeas;
  return cert;
}

/// ℓ1-least relaxation read off an infeasible run's stopping iterate:
/// b′ = b − z, and each equality is widened by yᵢ on the side it is
/// violated. The state must be expressed in `problem`'s units. Entries are
/// tightened by at most rounding error so that x is exactly feasible.
inline RelaxationResult extractRelaxation(const CqpProblem& problem,
                                          const AugmentedState& st) {
  RelaxationResult rel;
  rel.xFeasible = st.x;
  const Vector ax = problem.A * st.x;
  rel.bPrime = problem.b - st.z;
  for (Index i = 0; i < problem.m; ++i) {
    const double gap = ax[i] - rel.bPrime[i];
    const double tol =
        1e-9 * (1.0 + std::abs(problem.b[i]) + std::abs(ax[i]) + st.z[i]);
    if (gap < -tol) {
      throw AssertionFailure("relaxed inequality " + std::to_string(i) +
                             " is violated by the stopping iterate");
    }
    rel.bPrime[i] = std::min(rel.bPrime[i], ax[i]);
  }
  const Vector r = problem.C * st.x - problem.d;
  rel.dPlusShift = Vector::Zero(problem.p);
  rel.dMinusShift = Vector::Zero(problem.p);
  for (Index i = 0; i < problem.p; ++i) {
    const double tol =
        1e-9 * (1.0 + std::abs(problem.d[i]) + std::abs(r[i]) + st.y[i]);
    if (std::abs(r[i]) > st.y[i] + tol) {
      throw AssertionFailure("relaxed equality " + std::to_string(i) +
                             " is violated by the stopping iterate");
    }
    if (r[i] > 0.0) rel.dPlusShift[i] = std::max(st.y[i], r[i]);
    if (r[i] < 0.0) rel.dMinusShift[i] = std::max(st.y[i], -r[i]);
  }
  return rel;
}

namespace detail {

/// Maps a state of the row-normalized problem back to original units.
inline AugmentedState unscale(const AugmentedState& st,
                              const ScalingRecord& rec) {
  AugmentedState out = st;
  out.z = st.z.cwiseQuotient(rec.rowScaleIneq);
  out.s = st.s.cwiseQuotient(rec.rowScaleIneq);
  out.pi = st.pi.cwiseProduct(rec.rowScaleIneq);
  out.xi = st.xi.cwiseProduct(rec.rowScaleIneq);
  out.y = st.y.cwiseQuotient(rec.rowScaleEq);
  out.tPlus = st.tPlus.cwiseQuotient(rec.rowScaleEq);
  out.tMinus = st.tMinus.cwiseQuotient(rec.rowScaleEq);
  out.eta = st.eta.cwiseProduct(rec.rowScaleEq);
  out.zeta = st.zeta.cwiseProduct(rec.rowScaleEq);
  return out;
}

}  // namespace detail

/// Infeasible-start solve: alternates the stopping tests, the penalty update
/// and one base iteration until Err ≤ tol, a valid certificate appears, or
/// maxIter base iterations have been taken.
inline SolveReport solve(const CqpProblem& input, const Vector& x0,
                         const SolveOptions& options = {}) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  SolveReport report;
  const CqpProblem original = validate(input, {}, &report.warnings);
  CqpProblem problem = original;
  ScalingRecord scaling{Vector::Ones(original.m), Vector::Ones(original.p)};
  if (options.normalize) {
    std::tie(problem, scaling) = normalizeRows(original);
  }

  BaseIterationOptions baseOpts = options.base;
  baseOpts.constraintReduction = options.constraintReduction;

  AugmentedState st = augment(problem, x0);
  PenaltyConfig config;
  config.sigma1 = options.sigma1;
  config.sigma2 = options.sigma2;
  config.phi = options.phi0;
  applyThresholds(config,
                  initThresholds(st, kktResiduals(problem, st, config.phi),
                                 config.phi));

  BaseIterationVars vars(baseOpts.deltaBar);
  std::vector<Index> Q = allConstraints(problem.m);
  std::optional<AugmentedState> previous;

  auto finish = [&](SolveStatus status) {
    report.status = status;
    const AugmentedState out = detail::unscale(st, scaling);
    report.x = out.x;
    report.z = out.z;
    report.y = out.y;
    report.pi = out.pi;
    report.xi = out.xi;
    report.eta = out.eta;
    report.zeta = out.zeta;
    report.phiFinal = config.phi;
    report.objective = original.objective(out.x);
    if (report.certificate) {
      report.certificate->piHat =
          report.certificate->piHat.cwiseProduct(scaling.rowScaleIneq);
      report.certificate->omegaHat =
          report.certificate->omegaHat.cwiseProduct(scaling.rowScaleEq);
    }
    if (status == SolveStatus::Infeasible) {
      report.relaxation = extractRelaxation(original, out);
    }
    report.solveTimeMs =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return report;
  };

  for (int k = 0;; ++k) {
    report.err = optimalityError(problem, st.x, st.pi, st.eta, st.zeta);
    report.trace.push_back(TraceRow{k, config.phi, dualityMeasure(st),
                                    report.err, static_cast<Index>(Q.size()),
                                    problem.objective(st.x),
                                    penaltyObjective(problem, st, config.phi),
                                    st.relaxationInfNorm()});
    if (report.err <= options.tol) return finish(SolveStatus::Optimal);

    FarkasCertificate cert =
        certificateCandidate(problem, st, config.phi, Q, options.tolInfeas);
    if (cert.valid) {
      report.certificate = std::move(cert);
      return finish(SolveStatus::Infeasible);
    }
    if (k >= options.maxIter) return finish(SolveStatus::IterationLimit);

    if (previous) {
      const double now = penaltyObjective(problem, st, config.phi);
      const double before = penaltyObjective(problem, *previous, config.phi) +
                            penaltyObjectiveNoise(problem, *previous, config.phi);
      if (now > before) ++report.monotoneViolations;
    }

    const double phiNext = update(config, st, kktResiduals(problem, st, config.phi));
    if (phiNext > config.phi) {
      config.phi = phiNext;
      vars.reset();
      ++report.phiIncreases;
    }

    previous = st;
    try {
      StepResult res = step(problem, st, config.phi, vars, baseOpts);
      if (!res.accepted) ++report.rejectedSteps;
      if (!res.state.strictlyInterior()) ++report.interiorViolations;
      st = std::move(res.state);
      Q = std::move(res.Q);
    } catch (const Error& e) {
      report.diagnostic = e.what();
      report.iterations = k;
      return finish(SolveStatus::Failed);
    }
    report.iterations = k + 1;
  }
}

}  // namespace isqp
