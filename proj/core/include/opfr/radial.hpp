#pragma once

#include <vector>

#include "opfr/bfm.hpp"
#include "opfr/netmodel.hpp"

/// Radial-network DistFlow: residuals, sweep-based nonlinear solve, linear
/// (simplified DistFlow) solves in both orientations, and verification of
/// the flow/voltage bound lemmas.
namespace opfr {

/// Solution of the simplified (lossless) DistFlow equations.
struct LinearState {
  CVec S_lin;  ///< per directed edge
  RVec v_lin;  ///< per bus, v_lin(0) = v0
};

/// Residuals of the angle-free DistFlow equations.
struct DistflowResiduals {
  CVec balance;  ///< per bus: power balance with loss terms
  RVec drop;     ///< per edge: v_j - v_k - 2 Re(conj(z) S) + |z|^2 l
  RVec quad;     ///< per edge: v_j l_jk - |S_jk|^2 (signed; > 0 means relaxed)
  double max_abs() const;
};

/// Iteration control for the backward/forward sweep.
struct SweepOptions {
  double tol = 1e-12;  ///< max successive update to declare convergence
  int max_iter = 200;
};

/// Comparison of a nonlinear DistFlow point against the linear approximation
/// plus the consistency identities behind the comparison.  Violation lists
/// flag entries outside the stated slack; they signal a broken hypothesis
/// (e.g. generation-dominated injections), not an exception.
struct BoundReport {
  RVec flow_gap_re;  ///< per edge: Re(S - S_lin), expected >= -slack
  RVec flow_gap_im;  ///< per edge: Im(S - S_lin), expected >= -slack
  RVec voltage_gap;  ///< per bus: v_lin - v, expected >= -slack
  CVec subtree_sum;  ///< per edge (i,j): -sum_{k in T_j} s_k (= S_lin)
  CVec loss_sum;     ///< per edge (i,j): z l + sum of z l over T_j's edges
  RVec flow_identity;          ///< per edge: |S - subtree_sum - loss_sum|
  RVec voltage_identity;       ///< per bus: telescoped voltage-drop residual
  RVec reverse_flow_identity;  ///< per edge: reversed-orientation identity
  RVec reverse_flow_gap_re;    ///< per edge: Re(S_lin_rev - S_rev) >= -slack
  RVec reverse_flow_gap_im;    ///< per edge: Im component of the same
  std::vector<int> flow_violations;     ///< edges breaking a flow bound
  std::vector<int> voltage_violations;  ///< buses breaking the voltage bound
  double slack = 1e-9;
  bool ok() const {
    return flow_violations.empty() && voltage_violations.empty();
  }
  double max_identity_residual() const;
};

/// Residuals of x against the DistFlow equations on dnet.
DistflowResiduals distflow_residual(const DirectedNetwork& dnet,
                                    const BranchFlowState& x);

/// Solve the nonlinear DistFlow equations on a radial network by
/// backward/forward sweep from l = 0, v = v0 (converging to the
/// high-voltage solution branch).  `s` holds the fixed injections at buses
/// 1..n (entry 0 is ignored; the slack injection is computed).  Throws
/// DomainError for non-radial networks and ConvergenceError (with the last
/// residual) when the iteration budget is exhausted -- the signature of an
/// infeasible or overloaded case.
BranchFlowState solve_radial(const Network& net, const CVec& s,
                             const SweepOptions& opts = {});

/// Simplified DistFlow on the away-from-root orientation:
/// S_lin_ij = -sum_{k in T_j} s_k, v_lin_j = v0 - sum over the root->j path
/// of 2 Re(conj(z) S_lin).  One backward and one forward pass; exact.
LinearState solve_linear_distflow(const Network& net, const CVec& s);

/// Simplified DistFlow on the toward-root orientation.  Componentwise
/// S_lin_rev = -S_lin and v_lin_rev = v_lin; computed independently by the
/// reversed recursion, not by negation.
LinearState solve_linear_reverse(const Network& net, const CVec& s);

/// Compare a DistFlow point against the linear approximation (both solved
/// from the same injections on the away orientation) and verify the
/// expansion identities behind the bounds, including the reversed
/// orientation.  Requires a radial dnet.
BoundReport check_bounds(const DirectedNetwork& dnet, const BranchFlowState& x,
                         const LinearState& lin, const TreeIndex& tree,
                         double slack = 1e-9);

}  // namespace opfr
