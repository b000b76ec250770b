#include <gtest/gtest.h>

#include "helpers.hpp"
#include "isqp/gen.hpp"
#include "isqp/oracle.hpp"

using namespace isqp;
using namespace isqp::test;

TEST(Rng, Deterministic) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    if (i == 0) EXPECT_NE(x, c.normal());
  }
}

TEST(Rng, UniformInOpenUnitInterval) {
  Rng rng(1);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  double sum = 0, sq = 0;
  const int count = 40000;
  for (int i = 0; i < count; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / count, 0.0, 0.02);
  EXPECT_NEAR(sq / count, 1.0, 0.03);
}

TEST(RandomFeasible, StrictlyFeasibleByConstruction) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GenSpec spec{50, 6, 3, HessianKind::StronglyConvex, true, seed};
    const auto [prob, xFeas] = randomFeasible(spec);
    EXPECT_GT((prob.A * xFeas - prob.b).minCoeff(), 1 - 1e-12);
    EXPECT_LT((prob.A * xFeas - prob.b).maxCoeff(), 2 + 1e-12);
    EXPECT_LE((prob.C * xFeas - prob.d).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_TRUE(prob.H.isDiagonal());
    EXPECT_GT(prob.H.diag().minCoeff(), 0.0);
    EXPECT_LT(prob.H.diag().maxCoeff(), 1.0);
    EXPECT_NO_THROW(validate(prob));
  }
}

TEST(RandomFeasible, LinearKindHasZeroHessian) {
  GenSpec spec{20, 4, 0, HessianKind::Linear, true, 1};
  EXPECT_EQ(randomFeasible(spec).first.H.maxAbs(), 0.0);
}

TEST(RandomFeasible, SameSeedSameProblem) {
  GenSpec spec{40, 5, 2, HessianKind::StronglyConvex, true, 77};
  const auto a = randomFeasible(spec);
  const auto b = randomFeasible(spec);
  EXPECT_EQ(a.first.A, b.first.A);
  EXPECT_EQ(a.first.b, b.first.b);
  EXPECT_EQ(a.first.C, b.first.C);
  EXPECT_EQ(a.first.H.diag(), b.first.H.diag());
  EXPECT_EQ(a.second, b.second);
}

TEST(RandomInfeasible, LastRowContradictsAnEarlierOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GenSpec spec{8, 3, 1, HessianKind::StronglyConvex, false, seed};
    const CqpProblem prob = randomInfeasible(spec);
    bool found = false;
    for (Index i = 0; i + 1 < prob.m; ++i) {
      if (prob.A.row(prob.m - 1) == -prob.A.row(i)) {
        const double delta = prob.b[prob.m - 1] + prob.b[i];
        EXPECT_GT(delta, 0.0);
        EXPECT_LT(delta, 1.0 + 1e-15);
        found = true;
      }
    }
    EXPECT_TRUE(found) << "seed " << seed;
  }
}

TEST(RandomInfeasible, OracleAgrees) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GenSpec spec{4 + static_cast<Index>(seed % 3), 2 + static_cast<Index>(seed % 2),
                 static_cast<Index>(seed % 2), HessianKind::StronglyConvex, false, seed};
    const CqpProblem prob = randomInfeasible(spec);
    EXPECT_FALSE(oracle::feasibilityTiny(prob).feasible) << "seed " << seed;
  }
}

TEST(RandomInfeasible, NeedsTwoRows) {
  GenSpec spec{1, 2, 0, HessianKind::StronglyConvex, false, 0};
  EXPECT_THROW(randomInfeasible(spec), PreconditionError);
}

TEST(InfeasibleStartPoint, ViolatesAConstraint) {
  GenSpec spec{30, 4, 0, HessianKind::StronglyConvex, true, 2};
  const CqpProblem prob = randomFeasible(spec).first;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StartPoint sp = infeasibleStartPoint(prob, seed);
    ASSERT_TRUE(sp.infeasible);
    EXPECT_LT((prob.A * sp.x0 - prob.b).minCoeff(), 0.0);
  }
}

TEST(InfeasibleStartPoint, FarBoundViolatedAtOnce) {
  const CqpProblem prob = make(vec({1}), vec({0}), mat(1, {1}), vec({1e6}));
  const StartPoint sp = infeasibleStartPoint(prob, 0);
  EXPECT_TRUE(sp.infeasible);
  EXPECT_EQ(sp.samples, 1);
}

TEST(InfeasibleStartPoint, GivesUpAfterCap) {
  const CqpProblem prob = make(vec({1}), vec({0}), mat(1, {1}), vec({-1e6}));
  const StartPoint sp = infeasibleStartPoint(prob, 0);
  EXPECT_FALSE(sp.infeasible);
  EXPECT_EQ(sp.samples, 100);
}

TEST(Svm, HardMarginStructure) {
  SvmData data{mat(1, {1, -1}), vec({1, -1})};
  const CqpProblem prob = svmProblem(data);
  EXPECT_EQ(prob.n, 2);
  EXPECT_EQ(prob.m, 2);
  EXPECT_EQ(prob.H.diag(), vec({1, 0}));
  // w − β ≥ 1 and w + β ≥ 1
  EXPECT_EQ(prob.A, mat(2, {1, -1, 1, 1}));
  EXPECT_EQ(prob.b, vec({1, 1}));
}

TEST(Svm, HardMarginSolution) {
  const auto r = oracle::solveTiny(svmProblem({mat(1, {1, -1}), vec({1, -1})}));
  ASSERT_EQ(r.verdict, oracle::Verdict::Optimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 0.0, 1e-12);
}

TEST(Svm, SamePatternBothClassesIsInfeasible) {
  const SvmData data{mat(1, {1, 1, 0}), vec({1, -1, 1})};
  const auto r = oracle::solveTiny(svmProblem(data));
  EXPECT_EQ(r.verdict, oracle::Verdict::Infeasible);
}

TEST(Svm, RelaxedStructureAndSolution) {
  const SvmData data{mat(1, {1, 1, 0}), vec({1, -1, 1})};
  const CqpProblem hard = svmProblem(data);
  const CqpProblem soft = svmRelaxedProblem(data, 1.0);
  EXPECT_EQ(soft.n, hard.n + 1);
  EXPECT_EQ(soft.m, hard.m + 1);
  EXPECT_EQ(soft.c, vec({0, 0, 1}));
  EXPECT_EQ(soft.A.row(3), mat(3, {0, 0, 1}));
  const auto r = oracle::solveTiny(soft);
  ASSERT_EQ(r.verdict, oracle::Verdict::Optimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-12);
  EXPECT_NEAR(r.x[0], 0.0, 1e-12);
  EXPECT_NEAR(r.x[1], 0.0, 1e-12);
  EXPECT_NEAR(r.x[2], 1.0, 1e-12);
  EXPECT_THROW(svmRelaxedProblem(data, 0.0), PreconditionError);
}

TEST(Svm, LargeTauReproducesHardMargin) {
  SvmData data{mat(2, {2, 1, 1, 3, -1, -1, -2, 0.5}), vec({1, 1, -1, -1})};
  const auto hard = oracle::solveTiny(svmProblem(data));
  const auto soft = oracle::solveTiny(svmRelaxedProblem(data, 1e3));
  ASSERT_EQ(hard.verdict, oracle::Verdict::Optimal);
  ASSERT_EQ(soft.verdict, oracle::Verdict::Optimal);
  EXPECT_NEAR(soft.x[3], 0.0, 1e-9);
  EXPECT_LE((soft.x.head(3) - hard.x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Svm, RejectsBadLabels) {
  EXPECT_THROW(svmProblem({mat(1, {1, 2}), vec({1, 0})}), PreconditionError);
}
