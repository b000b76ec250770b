#pragma once

#include <algorithm>
#include <array>

#include "isqp/problem.hpp"

namespace isqp {

struct PenaltyConfig {
  double sigma1 = 1.0;
  double sigma2 = 10.0;
  double gamma0 = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double gamma3 = 1.0;
  double phi = 1.0;
};

inline constexpr double kGammaFloor = 1e-8;

/// ‖[π; η − ζ]‖∞
inline double multiplierInfNorm(const AugmentedState& st) {
  return std::max(infNorm(st.pi), infNorm(Vector(st.eta - st.zeta)));
}

/// Thresholds taken from the starting point: γ0 = ‖[z0; y0]‖∞ / φ0 and
/// γ1..γ3 the sizes of the residual blocks, each floored at 1e-8.
inline std::array<double, 4> initThresholds(const AugmentedState& st0,
                                            const KktResiduals& res0,
                                            double phi0) {
  std::array<double, 4> g{st0.relaxationInfNorm() / phi0, res0.g1Norm(),
                          res0.g2Norm(), res0.g3Abs()};
  for (double& v : g) {
    if (!(v > 0.0)) v = kGammaFloor;
  }
  return g;
}

inline void applyThresholds(PenaltyConfig& config,
                            const std::array<double, 4>& g) {
  config.gamma0 = g[0];
  config.gamma1 = g[1];
  config.gamma2 = g[2];
  config.gamma3 = g[3];
}

/// Three-step penalty update. Never returns less than `config.phi`.
inline double update(const PenaltyConfig& config, const AugmentedState& st,
                     const KktResiduals& res) {
  double phi = config.phi;
  const double relax = st.relaxationInfNorm();
  if (relax > config.gamma0 * config.phi) {
    phi = config.sigma2 / config.gamma0 * relax;
  }
  const double mult = multiplierInfNorm(st);
  if (phi <= mult + config.sigma1 && res.g1Norm() <= config.gamma1 &&
      res.g2Norm() <= config.gamma2 && res.g3Abs() <= config.gamma3) {
    phi = config.sigma2 * (mult + config.sigma1);
  }
  return std::max(phi, config.phi);
}

}  // namespace isqp
