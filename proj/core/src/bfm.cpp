#include "opfr/bfm.hpp"

#include <cmath>
#include <string>

namespace opfr {

namespace {

double max_abs_of(const CVec& a) {
  return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

double BfmResiduals::max_abs() const {
  return std::max({max_abs_of(balance), max_abs_of(ohm),
                   max_abs_of(branch_power)});
}

double AngleRecoveryResult::max_defect() const {
  return defects.size() ? defects.cwiseAbs().maxCoeff() : 0.0;
}

BfmResiduals bfm_residual(const DirectedNetwork& dnet, const ComplexState& x) {
  const int nb = dnet.n_bus();
  const int m = dnet.n_edge();
  if (x.S.size() != m || x.I.size() != m || x.V.n_bus() != nb ||
      x.s.size() != nb)
    throw DomainError("complex state does not match the network dimensions");
  BfmResiduals r;
  r.balance = CVec::Zero(nb);
  r.ohm = CVec::Zero(m);
  r.branch_power = CVec::Zero(m);
  const CVec& V = x.V.values();
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = dnet.edges[e];
    r.ohm(e) = x.I(e) - de.y * (V(de.from) - V(de.to));
    r.branch_power(e) = x.S(e) - V(de.from) * std::conj(x.I(e));
  }
  for (int j = 0; j < nb; ++j) {
    Complex acc = -x.s(j);
    for (int e : dnet.out_edges(j)) acc += x.S(e);
    for (int e : dnet.in_edges(j))
      acc -= x.S(e) - dnet.edges[e].z * std::norm(x.I(e));
    r.balance(j) = acc;
  }
  return r;
}

ComplexState bim_to_bfm(const DirectedNetwork& dnet, const VoltageProfile& V) {
  const int m = dnet.n_edge();
  const CVec& v = V.values();
  CVec S(m), I(m);
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = dnet.edges[e];
    I(e) = de.y * (v(de.from) - v(de.to));
    S(e) = v(de.from) * std::conj(I(e));
  }
  return ComplexState{std::move(S), std::move(I), V,
                      injections_from_voltage(dnet.base, V)};
}

VoltageProfile bfm_to_bim(const DirectedNetwork& dnet, const ComplexState& x,
                          double tol) {
  const double res = bfm_residual(dnet, x).max_abs();
  if (res > tol)
    throw DomainError(
        "state does not satisfy the branch-flow equations (max residual " +
        std::to_string(res) + ")");
  return x.V;
}

BranchFlowState relax_magnitudes(const DirectedNetwork& dnet,
                                 const ComplexState& x) {
  BranchFlowState out;
  out.S = x.S;
  out.ell = x.I.cwiseAbs2();
  out.v = x.V.values().cwiseAbs2();
  out.s = x.s;
  (void)dnet;
  return out;
}

RVec beta(const DirectedNetwork& dnet, const BranchFlowState& x) {
  const int m = dnet.n_edge();
  if (x.S.size() != m || x.v.size() != dnet.n_bus())
    throw DomainError("branch-flow state does not match the network");
  RVec out(m);
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = dnet.edges[e];
    const Complex w = x.v(de.from) - std::conj(de.z) * x.S(e);
    if (std::abs(w) <= 1e-12)
      throw DomainError("degenerate edge " + std::to_string(e) +
                        ": v_j - conj(z) S_jk vanishes, angle undefined");
    out(e) = wrap_angle(std::arg(w));
  }
  return out;
}

AngleRecoveryResult check_cycle_condition(const DirectedNetwork& dnet,
                                          const BranchFlowState& x,
                                          const TreeIndex& tree,
                                          double angle_tol) {
  const int n = dnet.n_bus() - 1;
  const int m = dnet.n_edge();
  const RVec b = beta(dnet, x);

  RVec b_tree(n);
  for (int r = 0; r < n; ++r) b_tree(r) = b(tree.tree_edges[r]);
  RVec theta = tree.B_T_inv * b_tree;
  for (int i = 0; i < n; ++i) theta(i) = wrap_angle(theta(i));

  AngleRecoveryResult res;
  res.theta = theta;
  const RVec mismatch = tree.B * theta - b;
  res.winding = IVec(m);
  for (int e = 0; e < m; ++e)
    res.winding(e) = static_cast<int>(std::llround(mismatch(e) / (2.0 * kPi)));
  res.defects = RVec(m - n);
  for (int r = 0; r < m - n; ++r)
    res.defects(r) = wrap_angle(mismatch(tree.non_tree_edges[r]));
  res.satisfied = res.max_defect() <= angle_tol;
  return res;
}

ComplexState recover_angles(const DirectedNetwork& dnet,
                            const BranchFlowState& x, const TreeIndex& tree,
                            double angle_tol, double cone_tol) {
  AngleRecoveryResult cond = check_cycle_condition(dnet, x, tree, angle_tol);
  if (!cond.satisfied)
    throw RecoveryError(
        "cycle condition violated: max angle defect " +
        std::to_string(cond.max_defect()) + " rad exceeds tolerance " +
        std::to_string(angle_tol));
  const int m = dnet.n_edge();
  const int nb = dnet.n_bus();
  for (int e = 0; e < m; ++e) {
    const double gap = x.v(dnet.edges[e].from) * x.ell(e) - std::norm(x.S(e));
    if (std::abs(gap) > cone_tol)
      throw RecoveryError("edge " + std::to_string(e) +
                          " is not on the quadratic surface: v l - |S|^2 = " +
                          std::to_string(gap));
  }
  if (std::abs(x.v(0) - 1.0) > 1e-6)
    throw DomainError(
        "angle recovery assumes the slack convention v_0 = 1 (got v_0 = " +
        std::to_string(x.v(0)) + ")");

  CVec V(nb);
  V(0) = Complex(1.0, 0.0);
  for (int j = 1; j < nb; ++j)
    V(j) = std::polar(std::sqrt(x.v(j)), cond.theta(j - 1));
  CVec I(m);
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = dnet.edges[e];
    const double theta_from = de.from == 0 ? 0.0 : cond.theta(de.from - 1);
    I(e) = std::polar(std::sqrt(x.ell(e)), theta_from - std::arg(x.S(e)));
  }
  return ComplexState{x.S, std::move(I), VoltageProfile(std::move(V)), x.s};
}

BranchFlowState reverse_orientation(const DirectedNetwork& dnet,
                                    const BranchFlowState& x) {
  BranchFlowState out = x;
  for (int e = 0; e < dnet.n_edge(); ++e)
    out.S(e) = -(x.S(e) - dnet.edges[e].z * x.ell(e));
  return out;
}

}  // namespace opfr
