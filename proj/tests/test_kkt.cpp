#include <chrono>
#include <numeric>

#include <gtest/gtest.h>

#include "dense_kkt.hpp"
#include "helpers.hpp"
#include "isqp/base_mpc.hpp"
#include "isqp/gen.hpp"
#include "isqp/kkt.hpp"

using namespace isqp;
using namespace isqp::test;

namespace {

AugmentedState randomState(const CqpProblem& prob, Rng& rng, double lo = 0.1,
                           double hi = 3.0) {
  AugmentedState st;
  auto pos = [&](Index k) {
    Vector v(k);
    for (Index i = 0; i < k; ++i) v[i] = rng.uniform(lo, hi);
    return v;
  };
  st.x = rng.normalVector(prob.n);
  st.z = pos(prob.m);
  st.y = pos(prob.p);
  st.s = pos(prob.m);
  st.tPlus = pos(prob.p);
  st.tMinus = pos(prob.p);
  st.pi = pos(prob.m);
  st.xi = pos(prob.m);
  st.eta = pos(prob.p);
  st.zeta = pos(prob.p);
  return st;
}

NewtonRhs randomRhs(const CqpProblem& prob, Rng& rng) {
  return {rng.normalVector(prob.n), rng.normalVector(prob.m), rng.normalVector(prob.p),
          rng.normalVector(prob.m), rng.normalVector(prob.m), rng.normalVector(prob.p),
          rng.normalVector(prob.p)};
}

CqpProblem randomProblem(Rng& rng, Index n, Index m, Index p, bool dense) {
  CqpProblem prob;
  prob.n = n;
  prob.m = m;
  prob.p = p;
  if (dense) {
    const Eigen::MatrixXd g = rng.normalMatrix(n, n);
    prob.H = Hessian::dense(g.transpose() * g);
  } else {
    Vector h(n);
    for (Index i = 0; i < n; ++i) h[i] = rng.uniform();
    prob.H = Hessian::diagonal(h);
  }
  prob.c = rng.normalVector(n);
  prob.A = rng.normalMatrix(m, n);
  prob.b = rng.normalVector(m);
  prob.C = rng.normalMatrix(p, n);
  prob.d = rng.normalVector(p);
  return prob;
}

std::vector<Index> randomSubset(Rng& rng, Index m) {
  std::vector<Index> Q;
  for (Index i = 0; i < m; ++i) {
    if (rng.uniform() < 0.6) Q.push_back(i);
  }
  return Q;
}

double relativeGap(const Direction& a, const Direction& b) {
  return (stack(a) - stack(b)).norm() / std::max(1.0, stack(b).norm());
}

}  // namespace

TEST(Assemble, SingleInequality) {
  const CqpProblem prob = make(vec({2}), vec({0}), mat(1, {3}), vec({0}));
  AugmentedState st = augment(prob, vec({1}));
  st.s = vec({0.5});
  st.z = vec({2});
  st.pi = vec({1.5});
  st.xi = vec({0.4});
  const KktWorkspace ws = assemble(prob, st, {0});
  const double dPi = 1.5 / 0.5, dXi = 0.4 / 2;
  ASSERT_EQ(ws.M.rows(), 1);
  EXPECT_NEAR(ws.M(0, 0), 2 + 9 * dPi * dXi / (dPi + dXi), 1e-14);
}

TEST(Assemble, EmptySetLeavesHessian) {
  const CqpProblem prob = make(vec({2, 3}), vec({0, 0}), mat(2, {1, 2, 3, 4}), vec({0, 0}));
  Rng rng(3);
  const KktWorkspace ws = assemble(prob, randomState(prob, rng), {});
  EXPECT_EQ(ws.M, prob.H.toDense());
}

TEST(Assemble, EqualityOnly) {
  const CqpProblem prob = make(vec({1, 0.5}), vec({0, 0}), RowMatrix(), Vector(),
                               mat(2, {1, -2}), vec({0}));
  Rng rng(4);
  const AugmentedState st = randomState(prob, rng);
  const KktWorkspace ws = assemble(prob, st, {});
  const double dEta = st.eta[0] / st.tPlus[0], dZeta = st.zeta[0] / st.tMinus[0];
  const double dC = 4 * dEta * dZeta / (dEta + dZeta);
  Eigen::MatrixXd expected = prob.H.toDense();
  expected += dC * prob.C.row(0).transpose() * prob.C.row(0);
  EXPECT_LE((ws.M - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Assemble, Symmetric) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const CqpProblem prob = randomProblem(rng, 5, 8, 2, rep % 2 == 0);
    const KktWorkspace ws = assemble(prob, randomState(prob, rng), randomSubset(rng, 8));
    EXPECT_LE((ws.M - ws.M.transpose()).cwiseAbs().maxCoeff(), 1e-12 * ws.M.norm());
  }
}

TEST(Assemble, PerturbsSingularMatrix) {
  // H = 0 and one row in Q: M has rank one.
  const CqpProblem prob = make(vec({0, 0}), vec({1, 1}), mat(2, {1, 0}), vec({0}));
  Rng rng(6);
  const AugmentedState st = randomState(prob, rng, 1.0, 1.0);
  const KktWorkspace ws = assemble(prob, st, {0});
  EXPECT_GT(ws.perturbation, 0.0);
  const NewtonRhs r = randomRhs(prob, rng);
  const Direction d = solveStep(ws, r);
  EXPECT_TRUE(stack(d).allFinite());
}

TEST(SolveStep, ScalarHandExample) {
  // min ½x² − x, x ≥ 0 at x = 2, π = 1; ξ/z = 1e10 pins Δz to zero.
  const CqpProblem prob = scalarQp();
  AugmentedState st = augment(prob, vec({2}));
  st.z = vec({1e-10});
  st.refreshSlacks(prob);
  st.pi = vec({1});
  st.xi = vec({1});
  const KktWorkspace ws = assemble(prob, st, {0});
  const Direction d = solveStep(ws, affineRhs(prob, st, 2.0, ws.inQ), StepKind::Affine);
  EXPECT_NEAR(d.x[0], -2.0 / 3.0, 1e-9);
  EXPECT_NEAR(d.pi[0], -2.0 / 3.0, 1e-9);
  EXPECT_NEAR(d.z[0], 0.0, 1e-9);
}

TEST(SolveStep, ZeroRhsGivesZeroDirection) {
  Rng rng(7);
  const CqpProblem prob = randomProblem(rng, 4, 6, 2, false);
  const AugmentedState st = randomState(prob, rng);
  const KktWorkspace ws = assemble(prob, st, {0, 2, 3, 5});
  NewtonRhs zero{Vector::Zero(4), Vector::Zero(6), Vector::Zero(2), Vector::Zero(6),
                 Vector::Zero(6), Vector::Zero(2), Vector::Zero(2)};
  EXPECT_EQ(stack(solveStep(ws, zero)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveStep, MatchesDenseSystem) {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.below(5));
    const Index m = 1 + static_cast<Index>(rng.below(8));
    const Index p = std::min<Index>(n, static_cast<Index>(rng.below(3)));
    const CqpProblem prob = randomProblem(rng, n, m, p, rep % 3 == 0);
    const AugmentedState st = randomState(prob, rng);
    const std::vector<Index> Q = rep % 4 == 0 ? allConstraints(m) : randomSubset(rng, m);
    const NewtonRhs r = randomRhs(prob, rng);
    const KktWorkspace ws = assemble(prob, st, Q);
    const Direction d = solveStep(ws, r);
    const Direction ref = denseKktSolve(prob, st, Q, r);
    EXPECT_LE(relativeGap(d, ref), 1e-8) << "rep " << rep;
  }
}

TEST(SolveStep, MatchesDenseSystemWithExtremeWeights) {
  // Slack pairs near 1e-14 with duals near 1 push D above the augmented-row
  // threshold.
  Rng rng(12);
  int augmentedRuns = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const CqpProblem prob = randomProblem(rng, 4, 7, rep % 2 ? 2 : 0, false);
    AugmentedState st = randomState(prob, rng);
    st.s[0] = st.z[0] = 1e-14;
    st.s[3] = st.z[3] = 1e-12;
    if (prob.p > 0) st.tPlus[1] = st.tMinus[1] = 1e-13;
    const std::vector<Index> Q = allConstraints(prob.m);
    const NewtonRhs r = randomRhs(prob, rng);
    const KktWorkspace ws = assemble(prob, st, Q);
    augmentedRuns += ws.augmented() ? 1 : 0;
    const Direction d = solveStep(ws, r);
    const Direction ref = denseKktSolve(prob, st, Q, r);
    EXPECT_LE(relativeGap(d, ref), 1e-8) << "rep " << rep;
  }
  EXPECT_EQ(augmentedRuns, 50);
}

TEST(SolveStep, TinySlacksKeepDirectionAccurate) {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const CqpProblem prob = randomProblem(rng, 3, 6, 1, false);
    AugmentedState st = randomState(prob, rng);
    st.s[1] = 1e-22;
    st.pi[1] = 1e6;
    st.tPlus[0] = 1e-20;
    st.eta[0] = 1e5;
    st.z[2] = 1e-24;
    st.xi[2] = 1e5;
    const std::vector<Index> Q = allConstraints(prob.m);
    NewtonRhs r = randomRhs(prob, rng);
    r.rpi[1] = 1e-16;
    r.reta[0] = 1e-15;
    const KktWorkspace ws = assemble(prob, st, Q);
    const Direction d = solveStep(ws, r);
    const Direction ref = denseKktSolve(prob, st, Q, r);
    EXPECT_LE(detail::norm(detail::residualOf(ws, r, d)), 1e-12 * detail::norm(r));
    EXPECT_NEAR(st.pi[1] * d.s[1] + st.s[1] * d.pi[1], r.rpi[1], 1e-28);
    EXPECT_NEAR(st.eta[0] * d.tPlus[0] + st.tPlus[0] * d.eta[0], r.reta[0], 1e-27);
    EXPECT_LE(relativeGap(d, ref), 1e-8) << "rep " << rep;
  }
}

TEST(SolveStep, CostGrowsAtMostLinearlyInReducedSet) {
  const Index n = 20;
  GenSpec spec{100 * n, n, 0, HessianKind::StronglyConvex, true, 1};
  const CqpProblem prob = randomFeasible(spec).first;
  Rng rng(13);
  const AugmentedState st = randomState(prob, rng);
  const NewtonRhs r = randomRhs(prob, rng);
  auto timeFor = [&](Index q) {
    std::vector<Index> Q(static_cast<std::size_t>(q));
    std::iota(Q.begin(), Q.end(), Index{0});
    const auto start = std::chrono::steady_clock::now();
    for (int rep = 0; rep < 20; ++rep) {
      const KktWorkspace ws = assemble(prob, st, Q);
      const Direction d = solveStep(ws, r);
      EXPECT_TRUE(d.x.allFinite());
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  timeFor(n);
  const double small = timeFor(10 * n);
  const double large = timeFor(100 * n);
  // Linear growth predicts a factor of 10; allow slack for timer noise.
  EXPECT_LT(large / small, 25.0);
}
