#include "opfr/radial.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opfr {

double DistflowResiduals::max_abs() const {
  double m = balance.size() ? balance.cwiseAbs().maxCoeff() : 0.0;
  if (drop.size()) m = std::max(m, drop.cwiseAbs().maxCoeff());
  if (quad.size()) m = std::max(m, quad.cwiseAbs().maxCoeff());
  return m;
}

double BoundReport::max_identity_residual() const {
  double m = 0.0;
  for (const RVec* r :
       {&flow_identity, &voltage_identity, &reverse_flow_identity})
    if (r->size()) m = std::max(m, r->cwiseAbs().maxCoeff());
  return m;
}

DistflowResiduals distflow_residual(const DirectedNetwork& dnet,
                                    const BranchFlowState& x) {
  const int nb = dnet.n_bus();
  const int m = dnet.n_edge();
  if (x.S.size() != m || x.ell.size() != m || x.v.size() != nb ||
      x.s.size() != nb)
    throw DomainError("branch-flow state does not match the network");
  DistflowResiduals r;
  r.balance = CVec::Zero(nb);
  r.drop = RVec::Zero(m);
  r.quad = RVec::Zero(m);
  for (int j = 0; j < nb; ++j) {
    Complex acc = -x.s(j);
    for (int e : dnet.out_edges(j)) acc += x.S(e);
    for (int e : dnet.in_edges(j))
      acc -= x.S(e) - dnet.edges[e].z * x.ell(e);
    r.balance(j) = acc;
  }
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = dnet.edges[e];
    r.drop(e) = x.v(de.from) - x.v(de.to) -
                2.0 * (std::conj(de.z) * x.S(e)).real() +
                std::norm(de.z) * x.ell(e);
    r.quad(e) = x.v(de.from) * x.ell(e) - std::norm(x.S(e));
  }
  return r;
}

BranchFlowState solve_radial(const Network& net, const CVec& s,
                             const SweepOptions& opts) {
  if (!net.is_radial())
    throw DomainError("the sweep power-flow solver requires a radial network");
  if (s.size() != net.n_bus())
    throw DomainError("injection vector must have one entry per bus");
  const DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  const TreeIndex tree = spanning_tree(dnet);
  const int nb = net.n_bus();
  const int m = dnet.n_edge();

  BranchFlowState x;
  x.S = CVec::Zero(m);
  x.ell = RVec::Zero(m);
  x.v = RVec::Constant(nb, net.v0);
  x.s = s;
  x.s(0) = Complex(0, 0);

  double update = kInf;
  for (int it = 0; it < opts.max_iter; ++it) {
    update = 0.0;
    // Backward: accumulate sending-end powers from the leaves with the
    // current loss estimates l.
    for (auto jt = tree.order.rbegin(); jt != tree.order.rend(); ++jt) {
      const int j = *jt;
      if (j == 0) continue;
      const int e = tree.parent_edge[j];
      Complex S = -x.s(j) + dnet.edges[e].z * x.ell(e);
      for (int f : dnet.out_edges(j)) S += x.S(f);
      update = std::max(update, std::abs(S - x.S(e)));
      x.S(e) = S;
    }
    // Forward: propagate squared voltages from the root.
    for (int j : tree.order) {
      if (j == 0) continue;
      const int e = tree.parent_edge[j];
      const DirectedEdge& de = dnet.edges[e];
      const double v = x.v(de.from) - 2.0 * (std::conj(de.z) * x.S(e)).real() +
                       std::norm(de.z) * x.ell(e);
      update = std::max(update, std::abs(v - x.v(j)));
      x.v(j) = v;
      if (v < 1e-6) {
        const double res = distflow_residual(dnet, x).max_abs();
        throw ConvergenceError(
            "voltage collapsed at bus " + std::to_string(j) +
                " during the sweep; the case is infeasible or overloaded",
            res, it + 1);
      }
    }
    // Current magnitudes from the branch powers.
    for (int e = 0; e < m; ++e) {
      const double ell = std::norm(x.S(e)) / x.v(dnet.edges[e].from);
      update = std::max(update, std::abs(ell - x.ell(e)));
      x.ell(e) = ell;
    }
    if (update < opts.tol) {
      for (int e : dnet.out_edges(0)) x.s(0) += x.S(e);
      return x;
    }
  }
  const double res = distflow_residual(dnet, x).max_abs();
  throw ConvergenceError("sweep did not converge in " +
                             std::to_string(opts.max_iter) +
                             " iterations (last update " +
                             std::to_string(update) + ")",
                         res, opts.max_iter);
}

LinearState solve_linear_distflow(const Network& net, const CVec& s) {
  if (!net.is_radial())
    throw DomainError("simplified DistFlow requires a radial network");
  const DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  const TreeIndex tree = spanning_tree(dnet);
  LinearState lin;
  lin.S_lin = CVec::Zero(dnet.n_edge());
  lin.v_lin = RVec::Constant(net.n_bus(), net.v0);
  for (auto jt = tree.order.rbegin(); jt != tree.order.rend(); ++jt) {
    const int j = *jt;
    if (j == 0) continue;
    const int e = tree.parent_edge[j];
    Complex S = -s(j);
    for (int f : dnet.out_edges(j)) S += lin.S_lin(f);
    lin.S_lin(e) = S;
  }
  for (int j : tree.order) {
    if (j == 0) continue;
    const int e = tree.parent_edge[j];
    const DirectedEdge& de = dnet.edges[e];
    lin.v_lin(j) =
        lin.v_lin(de.from) - 2.0 * (std::conj(de.z) * lin.S_lin(e)).real();
  }
  return lin;
}

LinearState solve_linear_reverse(const Network& net, const CVec& s) {
  if (!net.is_radial())
    throw DomainError("simplified DistFlow requires a radial network");
  const DirectedNetwork dnet = orient(net, OrientMode::toward_root);
  // In the toward-root orientation the parent edge of j leaves j, so the
  // backward pass accumulates +s over subtrees and the forward pass adds the
  // drop while descending.
  const DirectedNetwork away = orient(net, OrientMode::away_from_root);
  const TreeIndex tree = spanning_tree(away);
  LinearState lin;
  lin.S_lin = CVec::Zero(dnet.n_edge());
  lin.v_lin = RVec::Constant(net.n_bus(), net.v0);
  for (auto jt = tree.order.rbegin(); jt != tree.order.rend(); ++jt) {
    const int j = *jt;
    if (j == 0) continue;
    const int e = tree.parent_edge[j];
    Complex S = s(j);
    for (int c : tree.children[j]) S += lin.S_lin(tree.parent_edge[c]);
    lin.S_lin(e) = S;
  }
  for (int j : tree.order) {
    if (j == 0) continue;
    const int e = tree.parent_edge[j];
    const DirectedEdge& de = dnet.edges[e];  // j -> parent
    lin.v_lin(j) =
        lin.v_lin(de.to) + 2.0 * (std::conj(de.z) * lin.S_lin(e)).real();
  }
  return lin;
}

BoundReport check_bounds(const DirectedNetwork& dnet, const BranchFlowState& x,
                         const LinearState& lin, const TreeIndex& tree,
                         double slack) {
  const int nb = dnet.n_bus();
  const int m = dnet.n_edge();
  if (m != nb - 1)
    throw DomainError("bound checks are defined on radial networks");
  for (int e = 0; e < m; ++e)
    if (tree.parent[dnet.edges[e].to] != dnet.edges[e].from)
      throw DomainError(
          "bound checks expect the away-from-root orientation");

  BoundReport rep;
  rep.slack = slack;
  rep.flow_gap_re = RVec(m);
  rep.flow_gap_im = RVec(m);
  rep.voltage_gap = RVec(nb);
  rep.subtree_sum = CVec(m);
  rep.loss_sum = CVec(m);
  rep.flow_identity = RVec(m);
  rep.voltage_identity = RVec(nb);
  rep.reverse_flow_identity = RVec(m);
  rep.reverse_flow_gap_re = RVec(m);
  rep.reverse_flow_gap_im = RVec(m);

  for (int e = 0; e < m; ++e) {
    const int j = dnet.edges[e].to;
    Complex load_sum(0, 0);
    for (int k : tree.subtree_nodes[j]) load_sum -= x.s(k);
    Complex losses = dnet.edges[e].z * x.ell(e);
    for (int f : tree.subtree_edges[j]) losses += dnet.edges[f].z * x.ell(f);
    rep.subtree_sum(e) = load_sum;
    rep.loss_sum(e) = losses;
    const Complex gap = x.S(e) - lin.S_lin(e);
    rep.flow_gap_re(e) = gap.real();
    rep.flow_gap_im(e) = gap.imag();
    rep.flow_identity(e) = std::abs(x.S(e) - load_sum - losses);

    // Reversed orientation: S_rev = -(S - z l); its subtree identity has no
    // own-edge loss term and opposite injection sign.
    const Complex S_rev = -(x.S(e) - dnet.edges[e].z * x.ell(e));
    const Complex S_lin_rev = -lin.S_lin(e);
    rep.reverse_flow_identity(e) =
        std::abs(S_rev + load_sum + (losses - dnet.edges[e].z * x.ell(e)));
    const Complex rgap = S_lin_rev - S_rev;
    rep.reverse_flow_gap_re(e) = rgap.real();
    rep.reverse_flow_gap_im(e) = rgap.imag();

    if (rep.flow_gap_re(e) < -slack || rep.flow_gap_im(e) < -slack ||
        rep.reverse_flow_gap_re(e) < -slack ||
        rep.reverse_flow_gap_im(e) < -slack)
      rep.flow_violations.push_back(e);
  }

  rep.voltage_gap(0) = lin.v_lin(0) - x.v(0);
  rep.voltage_identity(0) = 0.0;
  for (int j = 1; j < nb; ++j) {
    rep.voltage_gap(j) = lin.v_lin(j) - x.v(j);
    double acc = x.v(0);
    for (int e : tree.path[j]) {
      const DirectedEdge& de = dnet.edges[e];
      acc -= 2.0 * (std::conj(de.z) * x.S(e)).real() -
             std::norm(de.z) * x.ell(e);
    }
    rep.voltage_identity(j) = std::abs(x.v(j) - acc);
    if (rep.voltage_gap(j) < -slack) rep.voltage_violations.push_back(j);
  }
  return rep;
}

}  // namespace opfr
