#include "opfr/relax.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "opfr/bim.hpp"

namespace opfr {

namespace {

/// Orientation used by both relaxation builders: parent->child on radial
/// networks (so the DistFlow machinery applies directly), the case file's
/// listed order on meshes.
DirectedNetwork relax_orientation(const Network& net) {
  return orient(net, net.is_radial() ? OrientMode::away_from_root
                                     : OrientMode::as_listed);
}

void check_weights(const CostSpec& cost, int n_bus) {
  if (cost.kind != CostSpec::Kind::weighted_generation) return;
  if (cost.weights.size() != n_bus)
    throw DomainError("generation weights must cover every bus");
  for (int j = 0; j < n_bus; ++j)
    if (!std::isfinite(cost.weights(j)))
      throw DomainError("generation weights must be finite");
}

socp::ConeProblem empty_problem(int n_var, int n_eq) {
  socp::ConeProblem p;
  p.n_var = n_var;
  p.c = RVec::Zero(n_var);
  p.A = RMat::Zero(n_eq, n_var);
  p.b = RVec::Zero(n_eq);
  p.lower = RVec::Constant(n_var, -kInf);
  p.upper = RVec::Constant(n_var, kInf);
  return p;
}

}  // namespace

BranchFlowState BfmSocp::extract(const RVec& x) const {
  if (x.size() != problem.n_var)
    throw DomainError("solver point does not match the branch-flow problem");
  const int m = dnet.n_edge();
  const int nb = dnet.n_bus();
  BranchFlowState out;
  out.S = CVec(m);
  out.ell = RVec(m);
  out.v = RVec(nb);
  out.s = CVec(nb);
  for (int e = 0; e < m; ++e) {
    out.S(e) = Complex(x(re_S[e]), x(im_S[e]));
    out.ell(e) = x(ell[e]);
  }
  for (int j = 0; j < nb; ++j) {
    out.v(j) = x(v[j]);
    out.s(j) = Complex(x(re_s[j]), x(im_s[j]));
  }
  return out;
}

PartialMatrix BimSocp::extract(const RVec& x) const {
  if (x.size() != problem.n_var)
    throw DomainError("solver point does not match the partial-matrix "
                      "problem");
  const int m = dnet.n_edge();
  const int nb = dnet.n_bus();
  std::vector<std::pair<int, int>> edges;
  edges.reserve(m);
  for (const DirectedEdge& de : dnet.edges) edges.emplace_back(de.from, de.to);
  RVec diag(nb);
  for (int j = 0; j < nb; ++j) diag(j) = x(w_diag[j]);
  CVec off(m);
  for (int e = 0; e < m; ++e) off(e) = Complex(x(re_w[e]), x(im_w[e]));
  return PartialMatrix(nb, std::move(edges), std::move(diag), std::move(off));
}

BfmSocp build_bfm_socp(const Network& net, const CostSpec& cost) {
  net.validate();
  check_weights(cost, net.n_bus());

  BfmSocp b;
  b.dnet = relax_orientation(net);
  const int m = b.dnet.n_edge();
  const int nb = b.dnet.n_bus();

  b.re_S.resize(m);
  b.im_S.resize(m);
  b.ell.resize(m);
  for (int e = 0; e < m; ++e) {
    b.re_S[e] = 3 * e;
    b.im_S[e] = 3 * e + 1;
    b.ell[e] = 3 * e + 2;
  }
  b.v.resize(nb);
  b.re_s.resize(nb);
  b.im_s.resize(nb);
  for (int j = 0; j < nb; ++j) {
    b.v[j] = 3 * m + 3 * j;
    b.re_s[j] = 3 * m + 3 * j + 1;
    b.im_s[j] = 3 * m + 3 * j + 2;
  }

  // Rows: two balance components per bus, then one voltage drop per edge.
  socp::ConeProblem p = empty_problem(3 * m + 3 * nb, 2 * nb + m);

  for (int j = 0; j < nb; ++j) {
    const int re_row = 2 * j;
    const int im_row = 2 * j + 1;
    p.A(re_row, b.re_s[j]) = -1.0;
    p.A(im_row, b.im_s[j]) = -1.0;
    for (int e : b.dnet.out_edges(j)) {
      p.A(re_row, b.re_S[e]) += 1.0;
      p.A(im_row, b.im_S[e]) += 1.0;
    }
    for (int e : b.dnet.in_edges(j)) {
      const Complex z = b.dnet.edges[e].z;
      p.A(re_row, b.re_S[e]) -= 1.0;
      p.A(re_row, b.ell[e]) += z.real();
      p.A(im_row, b.im_S[e]) -= 1.0;
      p.A(im_row, b.ell[e]) += z.imag();
    }
  }
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = b.dnet.edges[e];
    const int row = 2 * nb + e;
    p.A(row, b.v[de.from]) += 1.0;
    p.A(row, b.v[de.to]) -= 1.0;
    p.A(row, b.re_S[e]) -= 2.0 * de.z.real();
    p.A(row, b.im_S[e]) -= 2.0 * de.z.imag();
    p.A(row, b.ell[e]) += std::norm(de.z);
  }

  for (int j = 0; j < nb; ++j) {
    const Bus& bus = net.buses[j];
    p.lower(b.v[j]) = bus.v_min;
    p.upper(b.v[j]) = bus.v_max;
    p.lower(b.re_s[j]) = bus.s_min.real();
    p.upper(b.re_s[j]) = bus.s_max.real();
    p.lower(b.im_s[j]) = bus.s_min.imag();
    p.upper(b.im_s[j]) = bus.s_max.imag();
  }

  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = b.dnet.edges[e];
    p.cones.push_back(
        socp::RotatedCone{{b.re_S[e], b.im_S[e]}, b.v[de.from], b.ell[e]});
  }

  switch (cost.kind) {
    case CostSpec::Kind::total_loss:
      for (int e = 0; e < m; ++e) p.c(b.ell[e]) = b.dnet.edges[e].z.real();
      break;
    case CostSpec::Kind::weighted_generation:
      for (int j = 0; j < nb; ++j) p.c(b.re_s[j]) = cost.weights(j);
      break;
    case CostSpec::Kind::quadratic_voltage: {
      // V^H C V in branch-flow coordinates through [W]_jk = v_j - conj(z) S:
      // the diagonal contributes C_jj v_j, each edge 2 Re(C_jk conj([W]_jk)).
      const CMat C = cost_matrix(net, cost);
      for (int j = 0; j < nb; ++j) p.c(b.v[j]) += C(j, j).real();
      for (int e = 0; e < m; ++e) {
        const DirectedEdge& de = b.dnet.edges[e];
        const Complex cjk = C(de.from, de.to);
        const Complex w = cjk * de.z;
        p.c(b.v[de.from]) += 2.0 * cjk.real();
        p.c(b.re_S[e]) -= 2.0 * w.real();
        p.c(b.im_S[e]) -= 2.0 * w.imag();
      }
      break;
    }
  }

  p.validate();
  b.problem = std::move(p);
  return b;
}

BimSocp build_bim_socp(const Network& net, const CostSpec& cost) {
  net.validate();
  check_weights(cost, net.n_bus());

  BimSocp b;
  b.dnet = relax_orientation(net);
  const int m = b.dnet.n_edge();
  const int nb = b.dnet.n_bus();

  b.w_diag.resize(nb);
  for (int j = 0; j < nb; ++j) b.w_diag[j] = j;
  b.re_w.resize(m);
  b.im_w.resize(m);
  for (int e = 0; e < m; ++e) {
    b.re_w[e] = nb + 2 * e;
    b.im_w[e] = nb + 2 * e + 1;
  }
  b.re_s.resize(nb);
  b.im_s.resize(nb);
  for (int j = 0; j < nb; ++j) {
    b.re_s[j] = nb + 2 * m + 2 * j;
    b.im_s[j] = nb + 2 * m + 2 * j + 1;
  }

  // Rows: the defining identity s_j = sum conj(y_jk) ([W]_jj - [W]_jk),
  // split into components, per bus.
  socp::ConeProblem p = empty_problem(3 * nb + 2 * m, 2 * nb);

  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = b.dnet.edges[e];
    const Complex cy = std::conj(de.y);
    // Contribution of this edge to its two endpoints.  At `from` the stored
    // entry is [W]_jk itself; at `to` it enters conjugated.
    for (int side = 0; side < 2; ++side) {
      const int j = side == 0 ? de.from : de.to;
      const double im_sign = side == 0 ? 1.0 : -1.0;
      const int re_row = 2 * j;
      const int im_row = 2 * j + 1;
      p.A(re_row, b.w_diag[j]) += cy.real();
      p.A(im_row, b.w_diag[j]) += cy.imag();
      p.A(re_row, b.re_w[e]) -= cy.real();
      p.A(re_row, b.im_w[e]) += im_sign * cy.imag();
      p.A(im_row, b.re_w[e]) -= cy.imag();
      p.A(im_row, b.im_w[e]) -= im_sign * cy.real();
    }
  }
  for (int j = 0; j < nb; ++j) {
    p.A(2 * j, b.re_s[j]) -= 1.0;
    p.A(2 * j + 1, b.im_s[j]) -= 1.0;
  }
  // Admittances can be large; rescale each row to unit max coefficient so the
  // solver sees a well-conditioned system.
  for (int r = 0; r < p.A.rows(); ++r) {
    const double scale = p.A.row(r).cwiseAbs().maxCoeff();
    if (scale > 1.0) {
      p.A.row(r) /= scale;
      p.b(r) /= scale;
    }
  }

  for (int j = 0; j < nb; ++j) {
    const Bus& bus = net.buses[j];
    p.lower(b.w_diag[j]) = bus.v_min;
    p.upper(b.w_diag[j]) = bus.v_max;
    p.lower(b.re_s[j]) = bus.s_min.real();
    p.upper(b.re_s[j]) = bus.s_max.real();
    p.lower(b.im_s[j]) = bus.s_min.imag();
    p.upper(b.im_s[j]) = bus.s_max.imag();
  }

  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = b.dnet.edges[e];
    p.cones.push_back(socp::RotatedCone{
        {b.re_w[e], b.im_w[e]}, b.w_diag[de.from], b.w_diag[de.to]});
  }

  // Every cost kind is a linear functional of W, via the same matrix the
  // QCQP uses: sum_j C_jj [W]_jj + sum_edges 2 Re(C_jk conj([W]_jk)).
  const CMat C = cost_matrix(net, cost);
  for (int j = 0; j < nb; ++j) p.c(b.w_diag[j]) = C(j, j).real();
  for (int e = 0; e < m; ++e) {
    const DirectedEdge& de = b.dnet.edges[e];
    const Complex cjk = C(de.from, de.to);
    p.c(b.re_w[e]) = 2.0 * cjk.real();
    p.c(b.im_w[e]) = 2.0 * cjk.imag();
  }

  p.validate();
  b.problem = std::move(p);
  return b;
}

std::string ExactnessReport::verdict_name(Verdict v) {
  switch (v) {
    case Verdict::exact:
      return "exact";
    case Verdict::inexact_cone:
      return "inexact_cone";
    case Verdict::inexact_cycle:
      return "inexact_cycle";
  }
  return "unknown";
}

namespace {

/// check_exactness with a per-edge tightness tolerance; the public scalar
/// overload forwards a constant vector.  The partial-matrix route transports
/// its native tolerance through the coordinate map, which stretches the cone
/// gap by |y_jk|^2 edge by edge.
ExactnessReport check_exactness_per_edge(const DirectedNetwork& dnet,
                                         const BranchFlowState& x,
                                         const TreeIndex& tree,
                                         const RVec& edge_tol,
                                         double report_tol, double angle_tol) {
  const int m = dnet.n_edge();
  if (x.S.size() != m || x.ell.size() != m || x.v.size() != dnet.n_bus())
    throw DomainError("branch-flow state does not match the network");

  ExactnessReport rep;
  rep.tol = report_tol;
  rep.cone_gap = RVec(m);
  rep.tight.assign(m, false);
  bool all_tight = true;
  for (int e = 0; e < m; ++e) {
    rep.cone_gap(e) =
        x.v(dnet.edges[e].from) * x.ell(e) - std::norm(x.S(e));
    rep.tight[e] = std::abs(rep.cone_gap(e)) <= edge_tol(e);
    all_tight = all_tight && rep.tight[e];
  }
  rep.radial = tree.non_tree_edges.empty();

  if (!all_tight) {
    rep.verdict = ExactnessReport::Verdict::inexact_cone;
    rep.cycle.satisfied = rep.radial;  // trees have no cycle condition
    return rep;
  }
  rep.cycle = check_cycle_condition(dnet, x, tree, angle_tol);
  rep.verdict = rep.cycle.satisfied ? ExactnessReport::Verdict::exact
                                    : ExactnessReport::Verdict::inexact_cycle;
  return rep;
}

}  // namespace

ExactnessReport check_exactness(const DirectedNetwork& dnet,
                                const BranchFlowState& x,
                                const TreeIndex& tree, double tol,
                                double angle_tol) {
  return check_exactness_per_edge(
      dnet, x, tree, RVec::Constant(dnet.n_edge(), tol), tol, angle_tol);
}

ComplexState recover_solution(const DirectedNetwork& dnet,
                              const TreeIndex& tree, const BranchFlowState& x,
                              const ExactnessReport& report,
                              double angle_tol) {
  if (!report.exact()) {
    std::ostringstream msg;
    msg << "cannot recover a power-flow solution: relaxation verdict is "
        << ExactnessReport::verdict_name(report.verdict);
    if (report.verdict == ExactnessReport::Verdict::inexact_cone &&
        report.cone_gap.size() > 0) {
      msg << " (max cone gap " << report.cone_gap.cwiseAbs().maxCoeff()
          << ", tolerance " << report.tol << ")";
    } else if (report.verdict == ExactnessReport::Verdict::inexact_cycle) {
      msg << " (max cycle defect " << report.cycle.max_defect() << ")";
    }
    throw RecoveryError(msg.str());
  }
  return recover_angles(dnet, x, tree, angle_tol, report.tol);
}

ComplexState recover_solution_wg(const DirectedNetwork& dnet,
                                 const TreeIndex& tree, const PartialMatrix& W,
                                 double rank1_tol, double angle_tol) {
  const CompletionResult comp = rank1_completion(W, tree, rank1_tol, angle_tol);
  return bim_to_bfm(dnet, comp.V);
}

double evaluate_cost(const DirectedNetwork& dnet, const CostSpec& cost,
                     const BranchFlowState& x) {
  const int m = dnet.n_edge();
  const int nb = dnet.n_bus();
  if (x.S.size() != m || x.ell.size() != m || x.v.size() != nb ||
      x.s.size() != nb)
    throw DomainError("branch-flow state does not match the network");
  switch (cost.kind) {
    case CostSpec::Kind::total_loss: {
      double acc = 0.0;
      for (int e = 0; e < m; ++e) acc += dnet.edges[e].z.real() * x.ell(e);
      return acc;
    }
    case CostSpec::Kind::weighted_generation: {
      check_weights(cost, nb);
      double acc = 0.0;
      for (int j = 0; j < nb; ++j) acc += cost.weights(j) * x.s(j).real();
      return acc;
    }
    case CostSpec::Kind::quadratic_voltage: {
      const CMat C = cost_matrix(dnet.base, cost);
      double acc = 0.0;
      for (int j = 0; j < nb; ++j) acc += C(j, j).real() * x.v(j);
      for (int e = 0; e < m; ++e) {
        const DirectedEdge& de = dnet.edges[e];
        const Complex wjk =
            x.v(de.from) - std::conj(de.z) * x.S(e);  // [W]_jk
        acc += 2.0 * (C(de.from, de.to) * std::conj(wjk)).real();
      }
      return acc;
    }
  }
  throw DomainError("unknown cost kind");
}

namespace {

/// On radial networks, recover by resweeping the relaxation's optimal
/// injections through the exact power-flow map: the swept point is
/// cone-tight to machine precision, which scrubs the sqrt-of-slack noise
/// the solver leaves on near-zero branch currents.  Returns nullopt when
/// the sweep or recovery fails (the caller falls back to direct recovery).
std::optional<ComplexState> resweep_recovery(const Network& net,
                                             const DirectedNetwork& dnet,
                                             const TreeIndex& tree,
                                             const CVec& s, double angle_tol) {
  if (!net.is_radial()) return std::nullopt;
  try {
    const BranchFlowState swept = solve_radial(net, s);
    return recover_angles(dnet, swept, tree, angle_tol);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

OpfResult solve_opf(const Network& net, Model model, const CostSpec& cost,
                    const socp::SolverOptions& solver_opts, double exact_tol,
                    double angle_tol) {
  // The exactness decision compares v_j l - |S|^2 against exact_tol; in the
  // partial-matrix model solver slack on the 2x2 gaps gets amplified by
  // |y|^2 when mapped to those coordinates, so the solves run tighter than
  // the exactness tolerance by a comfortable margin.  The gap floor stops at
  // 1e-8: partial-matrix instances share diagonal variables across cones,
  // which degrades the endgame conditioning below that level.
  socp::SolverOptions eff = solver_opts;
  eff.feas_tol = std::min(eff.feas_tol, 1e-9);
  eff.gap_tol = std::min(eff.gap_tol, 1e-8);
  eff.max_iter = std::max(eff.max_iter, 150);

  OpfResult out;
  out.model = model;
  if (model == Model::bfm) {
    const BfmSocp b = build_bfm_socp(net, cost);
    out.solution = socp::solve(b.problem, eff);
    out.objective = out.solution.objective;
    if (out.solution.status != socp::SolveStatus::optimal) return out;
    out.x = b.extract(out.solution.x);
    const TreeIndex tree = spanning_tree(b.dnet);
    out.exactness = check_exactness(b.dnet, out.x, tree, exact_tol, angle_tol);
    if (out.exactness.exact()) {
      out.recovered =
          resweep_recovery(net, b.dnet, tree, out.x.s, angle_tol);
      if (!out.recovered)
        out.recovered =
            recover_solution(b.dnet, tree, out.x, out.exactness, angle_tol);
    }
  } else {
    const BimSocp b = build_bim_socp(net, cost);
    out.solution = socp::solve(b.problem, eff);
    out.objective = out.solution.objective;
    if (out.solution.status != socp::SolveStatus::optimal) return out;
    const PartialMatrix W = b.extract(out.solution.x);
    out.x = wg_to_x(W, b.dnet);
    const TreeIndex tree = spanning_tree(b.dnet);
    // Tightness is judged on the native 2x2 minors of W; through the
    // coordinate map the equivalent branch-flow tolerance scales by |y|^2.
    RVec edge_tol(b.dnet.n_edge());
    for (int e = 0; e < b.dnet.n_edge(); ++e)
      edge_tol(e) =
          exact_tol * std::max(1.0, std::norm(b.dnet.edges[e].y));
    out.exactness = check_exactness_per_edge(b.dnet, out.x, tree, edge_tol,
                                             exact_tol, angle_tol);
    if (out.exactness.exact()) {
      out.recovered =
          resweep_recovery(net, b.dnet, tree, out.x.s, angle_tol);
      if (!out.recovered)
        out.recovered = recover_solution_wg(b.dnet, tree, W, exact_tol,
                                            angle_tol);
    }
  }
  return out;
}

namespace {

/// One adjustable component of the brute-force search.
struct FreeComponent {
  int bus = 0;
  bool imag = false;
  double lo = 0.0;
  double hi = 0.0;
};

double get_component(const CVec& s, const FreeComponent& c) {
  return c.imag ? s(c.bus).imag() : s(c.bus).real();
}

void set_component(CVec& s, const FreeComponent& c, double value) {
  s(c.bus) = c.imag ? Complex(s(c.bus).real(), value)
                    : Complex(value, s(c.bus).imag());
}

/// Radial solve + window check; returns the cost or kInf when infeasible.
double evaluate_candidate(const Network& net, const DirectedNetwork& dnet,
                          const CostSpec& cost, const CVec& s,
                          BranchFlowState* out_x, long& n_evaluated) {
  ++n_evaluated;
  BranchFlowState x;
  try {
    x = solve_radial(net, s);
  } catch (const ConvergenceError&) {
    return kInf;
  }
  const double slack = 1e-9;
  for (int j = 0; j < net.n_bus(); ++j) {
    const Bus& bus = net.buses[j];
    if (x.v(j) < bus.v_min - slack || x.v(j) > bus.v_max + slack) return kInf;
  }
  const Bus& root = net.buses[0];
  const Complex s0 = x.s(0);
  if (s0.real() < root.s_min.real() - slack ||
      s0.real() > root.s_max.real() + slack ||
      s0.imag() < root.s_min.imag() - slack ||
      s0.imag() > root.s_max.imag() + slack)
    return kInf;
  if (out_x) *out_x = x;
  return evaluate_cost(dnet, cost, x);
}

}  // namespace

BruteForceResult brute_force_opf(const Network& net, const CostSpec& cost,
                                 int grid_points) {
  net.validate();
  if (!net.is_radial())
    throw DomainError("brute force sweeps radial power flows only");
  if (net.n() > 3)
    throw DomainError("brute force supports at most three non-slack buses");
  if (grid_points < 2) throw DomainError("grid needs at least two points");

  std::vector<FreeComponent> comps;
  CVec base = CVec::Zero(net.n_bus());
  for (int j = 1; j < net.n_bus(); ++j) {
    const Bus& bus = net.buses[j];
    if (!std::isfinite(bus.s_min.real()) || !std::isfinite(bus.s_max.real()) ||
        !std::isfinite(bus.s_min.imag()) || !std::isfinite(bus.s_max.imag()))
      throw DomainError("brute force needs bounded injection boxes");
    base(j) = Complex(bus.s_min.real(), bus.s_min.imag());
    if (bus.s_min.real() < bus.s_max.real())
      comps.push_back({j, false, bus.s_min.real(), bus.s_max.real()});
    if (bus.s_min.imag() < bus.s_max.imag())
      comps.push_back({j, true, bus.s_min.imag(), bus.s_max.imag()});
  }

  double combos = 1.0;
  for (size_t i = 0; i < comps.size(); ++i) combos *= grid_points;
  if (combos > 2e6)
    throw DomainError("brute-force grid too large for this instance");

  const DirectedNetwork dnet = orient(net, OrientMode::away_from_root);

  BruteForceResult best;
  best.s = base;
  CVec best_s = base;

  std::vector<int> idx(comps.size(), 0);
  while (true) {
    CVec s = base;
    for (size_t c = 0; c < comps.size(); ++c) {
      const double t =
          static_cast<double>(idx[c]) / static_cast<double>(grid_points - 1);
      set_component(s, comps[c],
                    comps[c].lo + t * (comps[c].hi - comps[c].lo));
    }
    BranchFlowState x;
    const double cost_here =
        evaluate_candidate(net, dnet, cost, s, &x, best.n_evaluated);
    if (cost_here < kInf) {
      ++best.n_feasible;
      if (cost_here < best.cost) {
        best.cost = cost_here;
        best_s = s;
        best.x = x;
        best.feasible = true;
      }
    }
    // Odometer increment over the grid indices.
    size_t c = 0;
    for (; c < comps.size(); ++c) {
      if (++idx[c] < grid_points) break;
      idx[c] = 0;
    }
    if (c == comps.size()) break;
  }

  if (!best.feasible) return best;

  // Local polish: coordinate pattern search from the grid optimum, steps
  // halved whenever no move improves.
  std::vector<double> step(comps.size());
  for (size_t c = 0; c < comps.size(); ++c)
    step[c] = (comps[c].hi - comps[c].lo) / (grid_points - 1);
  for (int round = 0; round < 200; ++round) {
    bool improved = false;
    for (size_t c = 0; c < comps.size(); ++c) {
      for (const double dir : {1.0, -1.0}) {
        const double old = get_component(best_s, comps[c]);
        const double moved =
            std::clamp(old + dir * step[c], comps[c].lo, comps[c].hi);
        if (moved == old) continue;
        CVec s = best_s;
        set_component(s, comps[c], moved);
        BranchFlowState x;
        const double cost_here =
            evaluate_candidate(net, dnet, cost, s, &x, best.n_evaluated);
        if (cost_here < kInf) ++best.n_feasible;
        if (cost_here < best.cost) {
          best.cost = cost_here;
          best_s = s;
          best.x = x;
          improved = true;
        }
      }
    }
    if (!improved) {
      double max_step = 0.0;
      for (double& st : step) {
        st *= 0.5;
        max_step = std::max(max_step, st);
      }
      if (max_step < 1e-10) break;
    }
  }

  // First-order slack estimate: |gradient| . |final step| bounds how far
  // below the polished value the true optimum can still sit.
  double slack_acc = 1e-9;
  for (size_t c = 0; c < comps.size(); ++c) {
    const double h = std::max(step[c], 1e-7);
    const double center = get_component(best_s, comps[c]);
    double up = kInf, down = kInf;
    if (std::min(center + h, comps[c].hi) != center) {
      CVec s = best_s;
      set_component(s, comps[c], std::min(center + h, comps[c].hi));
      up = evaluate_candidate(net, dnet, cost, s, nullptr, best.n_evaluated);
    }
    if (std::max(center - h, comps[c].lo) != center) {
      CVec s = best_s;
      set_component(s, comps[c], std::max(center - h, comps[c].lo));
      down = evaluate_candidate(net, dnet, cost, s, nullptr, best.n_evaluated);
    }
    double grad = 0.0;
    if (up < kInf && down < kInf)
      grad = (up - down) / (2.0 * h);
    else if (up < kInf)
      grad = (up - best.cost) / h;
    else if (down < kInf)
      grad = (best.cost - down) / h;
    slack_acc += std::abs(grad) * std::max(step[c], 1e-10);
  }
  best.grid_slack = slack_acc;

  best.s = best_s;
  best.s(0) = best.x.s(0);
  return best;
}

}  // namespace opfr
