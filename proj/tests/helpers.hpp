#pragma once

#include <initializer_list>
#include <vector>

#include "isqp/problem.hpp"

namespace isqp::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline RowMatrix mat(Index cols, std::initializer_list<double> v) {
  const auto rows = static_cast<Index>(v.size()) / cols;
  RowMatrix out(rows, cols);
  Index k = 0;
  for (double x : v) {
    out(k / cols, k % cols) = x;
    ++k;
  }
  return out;
}

/// minimize ½xᵀdiag(h)x + cᵀx s.t. Ax ≥ b, Cx = d.
inline CqpProblem make(const Vector& h, const Vector& c, const RowMatrix& A,
                       const Vector& b, const RowMatrix& C = RowMatrix(),
                       const Vector& d = Vector()) {
  CqpProblem prob;
  prob.n = c.size();
  prob.m = b.size();
  prob.p = d.size();
  prob.H = Hessian::diagonal(h);
  prob.c = c;
  prob.A = prob.m > 0 ? A : RowMatrix(0, prob.n);
  prob.b = b;
  prob.C = prob.p > 0 ? C : RowMatrix(0, prob.n);
  prob.d = d;
  return prob;
}

/// min ½x² − x s.t. x ≥ 0.
inline CqpProblem scalarQp() {
  return make(vec({1.0}), vec({-1.0}), mat(1, {1.0}), vec({0.0}));
}

}  // namespace isqp::test
