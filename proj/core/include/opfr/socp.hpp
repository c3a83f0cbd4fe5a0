#pragma once

#include <string>
#include <vector>

#include "opfr/common.hpp"

/// Conic problem representation and a primal-dual interior-point solver for
/// linear objectives under linear equalities, box constraints, and rotated
/// second-order cone memberships.
namespace opfr::socp {

/// ||u||^2 <= a * b with a >= 0, b >= 0, over named variable indices.
struct RotatedCone {
  std::vector<int> u;
  int a = 0;
  int b = 0;
};

/// minimize c'x  subject to  A x = b,  lower <= x <= upper (componentwise,
/// +-inf allowed),  and each rotated cone.  Equal lower/upper bounds are
/// treated as equalities internally so the cone program keeps a nonempty
/// interior.
struct ConeProblem {
  int n_var = 0;
  RVec c;
  RMat A;  ///< may have zero rows
  RVec b;
  std::vector<RotatedCone> cones;
  RVec lower;
  RVec upper;

  /// Throws DomainError on inconsistent dimensions, out-of-range or
  /// overlapping cone indices, or crossed bounds.
  void validate() const;
  /// JSON debugging dump (schema in the README).
  std::string to_json(bool pretty = false) const;
};

enum class SolveStatus {
  optimal,
  infeasible,  ///< primal infeasibility certificate found
  max_iter,    ///< budget exhausted or numerical failure; see message
};

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 100;
  bool verbose = false;
};

/// Independently recomputable optimality measures.
struct KktResiduals {
  double primal = kInf;  ///< max equality/cone/box violation of x
  double dual = kInf;    ///< max violation of c + A'y + G'z = 0 and z in K*
  double gap = kInf;     ///< complementarity s'z / (1 + |objective|)
  double max_abs() const;
};

struct ConeSolution {
  SolveStatus status = SolveStatus::max_iter;
  RVec x;  ///< primal point
  RVec y;  ///< multipliers of the internal equality rows (A then pinned boxes)
  RVec z;  ///< multipliers of the internal conic rows (boxes then cones)
  double objective = kInf;
  double dual_objective = -kInf;
  KktResiduals residuals;
  int iterations = 0;
  std::string message;
};

/// Cone geometry: the rotated constraint and the standard second-order cone
/// it maps onto via (u, a, b) -> (a + b, 2u, a - b).
bool in_rotated_cone(const RVec& u, double a, double b);
bool in_standard_soc(const RVec& w);  ///< w0 >= ||w_1..||
RVec rotated_to_standard(const RVec& u, double a, double b);

/// Mehrotra predictor-corrector with Nesterov-Todd scaling and a dense KKT
/// factorization.  Deterministic: the same problem and options produce
/// bit-identical iterates.
ConeSolution solve(const ConeProblem& p, const SolverOptions& opts = {});

/// Recompute the KKT residuals of a returned solution from scratch (same
/// internal standard form, none of the solver's bookkeeping).
KktResiduals kkt_residuals(const ConeProblem& p, const ConeSolution& sol);

}  // namespace opfr::socp
