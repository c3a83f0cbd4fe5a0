#pragma once

#include "opfr/bim.hpp"
#include "opfr/netmodel.hpp"

/// Branch flow model: complex residuals, the constructive BIM<->BFM
/// bijection, the magnitude relaxation, implied angles beta(x), the cycle
/// condition, angle recovery, and orientation reversal.
namespace opfr {

/// A complex branch-flow point: sending-end powers S and currents I over
/// the directed edges, voltages V over buses, injections s over buses.
struct ComplexState {
  CVec S;
  CVec I;
  VoltageProfile V;
  CVec s;
};

/// The angle-relaxed point x = (S, l, v, s): l_jk = |I_jk|^2, v_j = |V_j|^2.
struct BranchFlowState {
  CVec S;   ///< per directed edge
  RVec ell; ///< per directed edge, >= 0
  RVec v;   ///< per bus, > 0, v(0) pinned to the network's v0
  CVec s;   ///< per bus
};

/// Residuals of the three branch-flow equation families.
struct BfmResiduals {
  CVec balance;       ///< per bus: power balance
  CVec ohm;           ///< per edge: I_jk - y_jk (V_j - V_k)
  CVec branch_power;  ///< per edge: S_jk - V_j conj(I_jk)
  double max_abs() const;
};

/// Outcome of the cycle-condition check / angle computation.
struct AngleRecoveryResult {
  bool satisfied = false;
  RVec theta;    ///< recovered bus angles over buses 1..n (theta_0 = 0), in (-pi, pi]
  IVec winding;  ///< per edge: integer k with B theta - beta = 2 pi k + defect
  RVec defects;  ///< per non-tree edge (tree.non_tree_edges order), wrapped
  double max_defect() const;
};

/// Residuals of a complex state against the branch-flow equations.
BfmResiduals bfm_residual(const DirectedNetwork& dnet, const ComplexState& x);

/// The constructive map from voltages to a full branch-flow point:
/// I by Ohm's law, S = V_j conj(I_jk), s by the injection equations.  The
/// output satisfies power balance identically.
ComplexState bim_to_bfm(const DirectedNetwork& dnet, const VoltageProfile& V);

/// The inverse map: project onto the voltage component, after checking that
/// the input actually satisfies the branch-flow equations to `tol`
/// (DomainError otherwise).
VoltageProfile bfm_to_bim(const DirectedNetwork& dnet, const ComplexState& x,
                          double tol = 1e-8);

/// The magnitude relaxation h: drop angles, keep l = |I|^2 and v = |V|^2.
BranchFlowState relax_magnitudes(const DirectedNetwork& dnet,
                                 const ComplexState& x);

/// Implied angle differences beta_jk = angle(v_j - conj(z_jk) S_jk) per
/// edge, each in (-pi, pi].  Throws DomainError when the argument is zero on
/// some edge (degenerate: the angle is undefined there).
RVec beta(const DirectedNetwork& dnet, const BranchFlowState& x);

/// Compute theta = wrap(B_T^{-1} beta_T) and test whether the non-tree rows
/// agree mod 2 pi: defects = wrap(B_perp theta - beta_perp), satisfied iff
/// all |defects| <= angle_tol.  Trees are always satisfied (no cycles).
AngleRecoveryResult check_cycle_condition(const DirectedNetwork& dnet,
                                          const BranchFlowState& x,
                                          const TreeIndex& tree,
                                          double angle_tol = 1e-6);

/// Recover the complex state from an angle-relaxed one:
/// V_j = sqrt(v_j) e^{i theta_j}, I_jk = sqrt(l_jk) e^{i(theta_j - angle S_jk)}.
/// Requires the cycle condition (RecoveryError carrying the defects
/// otherwise) and per-edge tightness v_j l_jk = |S_jk|^2 within cone_tol
/// (RecoveryError naming the first slack edge otherwise).
ComplexState recover_angles(const DirectedNetwork& dnet,
                            const BranchFlowState& x, const TreeIndex& tree,
                            double angle_tol = 1e-6, double cone_tol = 1e-6);

/// The same physical point on the reversed orientation:
/// S_hat_kj = -(S_jk - z_jk l_jk), l and v unchanged.  An involution.
BranchFlowState reverse_orientation(const DirectedNetwork& dnet,
                                    const BranchFlowState& x);

}  // namespace opfr
