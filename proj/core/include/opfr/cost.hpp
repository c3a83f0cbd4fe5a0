#pragma once

#include "opfr/common.hpp"

namespace opfr {

/// Objective specification shared by the QCQP builder and both SOCP
/// relaxation builders.  All variants are expressible through the partial
/// matrix W_G (equivalently through (S, l, v, s)), which is what makes the
/// cross-model objective comparison meaningful.
struct CostSpec {
  enum class Kind {
    total_loss,           ///< sum of real line losses == sum_j Re(s_j)
    weighted_generation,  ///< sum_j weights[j] * Re(s_j)
    quadratic_voltage,    ///< V^H C V with Hermitian C supported on the graph
  };

  Kind kind = Kind::total_loss;
  RVec weights;  ///< per-bus weights for weighted_generation (finite)
  CMat C;        ///< Hermitian matrix for quadratic_voltage

  static CostSpec loss() { return CostSpec{}; }
  static CostSpec generation(RVec w) {
    CostSpec c;
    c.kind = Kind::weighted_generation;
    c.weights = std::move(w);
    return c;
  }
  static CostSpec voltage(CMat m) {
    CostSpec c;
    c.kind = Kind::quadratic_voltage;
    c.C = std::move(m);
    return c;
  }
};

}  // namespace opfr
