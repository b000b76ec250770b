#include <gtest/gtest.h>

#include "helpers.hpp"
#include "isqp/base_mpc.hpp"
#include "isqp/gen.hpp"

using namespace isqp;
using namespace isqp::test;

namespace {

AugmentedState withSlacks(const Vector& s) {
  AugmentedState st;
  st.s = s;
  return st;
}

bool contains(const std::vector<Index>& Q, Index i) {
  return std::find(Q.begin(), Q.end(), i) != Q.end();
}

}  // namespace

TEST(SelectConstraints, KeepsSmallSlacksAndPads) {
  BaseIterationVars vars(0.1);
  const auto Q = selectConstraints(withSlacks(vec({0.01, 5, 0.02, 9})), vars, 1);
  EXPECT_TRUE(contains(Q, 0));
  EXPECT_TRUE(contains(Q, 2));
  EXPECT_GE(Q.size(), 2u);
}

TEST(SelectConstraints, PadsWithSmallestSlacks) {
  BaseIterationVars vars(0.1);
  BaseIterationOptions opts;
  opts.qmin = 0;
  const auto Q = selectConstraints(withSlacks(vec({4, 0.5, 7, 0.9, 3, 8})), vars, 2, opts);
  EXPECT_EQ(Q, (std::vector<Index>{1, 3, 4}));
}

TEST(SelectConstraints, DefaultMinimumIsThreeN) {
  BaseIterationVars vars(0.1);
  Vector s = Vector::LinSpaced(50, 1.0, 50.0);
  EXPECT_EQ(selectConstraints(withSlacks(s), vars, 4).size(), 12u);
}

TEST(SelectConstraints, DisabledReturnsEverything) {
  BaseIterationVars vars;
  BaseIterationOptions opts;
  opts.constraintReduction = false;
  const auto Q = selectConstraints(withSlacks(vec({1e-3, 5, 9})), vars, 1, opts);
  EXPECT_EQ(Q, (std::vector<Index>{0, 1, 2}));
}

TEST(SelectConstraints, ThresholdFixedForFiveIterationsThenAdapts) {
  BaseIterationVars vars(1.0);
  vars.lastMu = 1e-3;
  const AugmentedState st = withSlacks(Vector::Constant(10, 0.5));
  for (int k = 0; k < 5; ++k) {
    vars.iteration = k;
    selectConstraints(st, vars, 1);
    EXPECT_EQ(vars.delta, 1.0);
  }
  vars.iteration = 5;
  selectConstraints(st, vars, 1);
  EXPECT_DOUBLE_EQ(vars.delta, 1e-3);
  vars.lastMu = 1e-20;
  selectConstraints(st, vars, 1);
  EXPECT_DOUBLE_EQ(vars.delta, 1e-12);
  vars.reset();
  EXPECT_EQ(vars.iteration, 0);
  EXPECT_EQ(vars.delta, 1.0);
}

TEST(DualityMeasure, Examples) {
  AugmentedState st;
  st.s = vec({1, 2});
  st.pi = vec({2, 1});
  st.z = Vector::Zero(2);
  st.xi = Vector::Zero(2);
  EXPECT_DOUBLE_EQ(dualityMeasure(st), 1.0);
  st.pi.setZero();
  EXPECT_DOUBLE_EQ(dualityMeasure(st), 0.0);
  st.pi = vec({2, 1});
  st.z = vec({0.5, 3});
  st.xi = vec({1, 1});
  const double mu = dualityMeasure(st);
  st.pi *= 2;
  st.xi *= 2;
  EXPECT_DOUBLE_EQ(dualityMeasure(st), 2 * mu);
}

TEST(Step, ScalarQpConverges) {
  const CqpProblem prob = scalarQp();
  AugmentedState st = augment(prob, vec({2}));
  BaseIterationVars vars;
  int k = 0;
  for (; k < 30 && std::abs(st.x[0] - 1.0) > 1e-8; ++k) {
    st = step(prob, st, 10.0, vars).state;
  }
  EXPECT_LE(std::abs(st.x[0] - 1.0), 1e-8);
  EXPECT_LE(k, 30);
}

TEST(Step, NearFixedPointBarelyMoves) {
  const CqpProblem prob = scalarQp();
  AugmentedState st = augment(prob, vec({1}));
  st.z = vec({1e-15});
  st.refreshSlacks(prob);
  st.pi = vec({1e-15});
  st.xi = vec({10.0 - 1e-15});
  ASSERT_LE(dualityMeasure(st), 1e-14);
  BaseIterationVars vars;
  const StepResult r = step(prob, st, 10.0, vars);
  EXPECT_TRUE(r.accepted);
  EXPECT_LE(std::abs(r.state.x[0] - 1.0), 1e-12);
}

TEST(Step, InvariantsOnRandomProblems) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    GenSpec spec{200, 6, seed % 3 == 0 ? Index{0} : Index{3},
                 seed % 2 ? HessianKind::Linear : HessianKind::StronglyConvex, true, seed};
    const CqpProblem prob = normalizeRows(randomFeasible(spec).first).first;
    AugmentedState st = augment(prob, infeasibleStartPoint(prob, seed).x0);
    BaseIterationVars vars;
    const double phi = 50.0;
    for (int k = 0; k < 15; ++k) {
      const StepResult r = step(prob, st, phi, vars);
      ASSERT_TRUE(r.state.strictlyInterior()) << "seed " << seed << " iter " << k;
      ASSERT_TRUE(r.state.dualsNonnegative());
      const double before = penaltyObjective(prob, st, phi) + penaltyObjectiveNoise(prob, st, phi);
      if (r.accepted) {
        EXPECT_LE(penaltyObjective(prob, r.state, phi), before);
      }
      if (prob.p > 0) {
        const Vector gap = r.state.tPlus + r.state.tMinus - 2 * r.state.y;
        EXPECT_LE(gap.cwiseAbs().maxCoeff(), 1e-10 * (1 + r.state.y.cwiseAbs().maxCoeff()));
      }
      st = r.state;
    }
  }
}

TEST(Step, CoefficientsWithinBounds) {
  GenSpec spec{100, 5, 2, HessianKind::StronglyConvex, true, 9};
  const CqpProblem prob = randomFeasible(spec).first;
  AugmentedState st = augment(prob, infeasibleStartPoint(prob, 1).x0);
  BaseIterationVars vars;
  for (int k = 0; k < 10; ++k) {
    const StepResult r = step(prob, st, 20.0, vars);
    EXPECT_GE(r.sigma, 0.0);
    EXPECT_LE(r.sigma, 1.0);
    EXPECT_GE(r.alphaPrimal, 0.0);
    EXPECT_LE(r.alphaPrimal, 1.0);
    EXPECT_LE(r.alphaDual, 1.0);
    EXPECT_LE(r.backtracks, 21);
    EXPECT_EQ(vars.iteration, k + 1);
    st = r.state;
  }
}
