#include "opfr/pmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "opfr/bim.hpp"

namespace opfr {

namespace {

using Json = nlohmann::ordered_json;

std::pair<int, int> norm_pair(int j, int k) { return std::minmax(j, k); }

Json dump_extended(double x) {
  if (std::isinf(x)) return nullptr;
  return x;
}

Json dump_complex(const Complex& c) { return Json::array({c.real(), c.imag()}); }

}  // namespace

PartialMatrix::PartialMatrix(int n_bus, std::vector<std::pair<int, int>> edges,
                             RVec diag, CVec offdiag)
    : n_bus_(n_bus), edges_(std::move(edges)), diag_(std::move(diag)),
      offdiag_(std::move(offdiag)) {
  if (n_bus_ <= 0) throw DomainError("partial matrix needs at least one bus");
  if (diag_.size() != n_bus_)
    throw DomainError("diagonal size does not match the bus count");
  if (offdiag_.size() != static_cast<Eigen::Index>(edges_.size()))
    throw DomainError("off-diagonal size does not match the edge count");
  std::set<std::pair<int, int>> seen;
  for (const auto& [j, k] : edges_) {
    if (j < 0 || j >= n_bus_ || k < 0 || k >= n_bus_)
      throw DomainError("partial-matrix edge endpoint out of range");
    if (j == k) throw DomainError("partial-matrix edge may not be a loop");
    if (!seen.insert(norm_pair(j, k)).second)
      throw DomainError("duplicate partial-matrix edge");
  }
  for (int j = 0; j < n_bus_; ++j)
    if (!(diag_(j) > 0.0))
      throw DomainError("partial-matrix diagonal must be strictly positive");
}

int PartialMatrix::edge_between(int j, int k) const {
  for (int e = 0; e < n_edge(); ++e) {
    if ((edges_[e].first == j && edges_[e].second == k) ||
        (edges_[e].first == k && edges_[e].second == j))
      return e;
  }
  return -1;
}

Complex PartialMatrix::entry(int j, int k) const {
  if (j < 0 || j >= n_bus_ || k < 0 || k >= n_bus_)
    throw DomainError("partial-matrix index out of range");
  if (j == k) return Complex(diag_(j), 0.0);
  const int e = edge_between(j, k);
  if (e < 0) throw DomainError("partial-matrix entry is not specified");
  return edges_[e].first == j ? offdiag_(e) : std::conj(offdiag_(e));
}

PartialMatrix partial_from_voltage(const Network& net,
                                   const VoltageProfile& V) {
  const CVec& v = V.values();
  if (v.size() != net.n_bus())
    throw DomainError("voltage profile size does not match the network");
  RVec diag(net.n_bus());
  for (int j = 0; j < net.n_bus(); ++j) diag(j) = std::norm(v(j));
  CVec off(net.n_line());
  std::vector<std::pair<int, int>> edges;
  edges.reserve(net.n_line());
  for (int e = 0; e < net.n_line(); ++e) {
    const Line& ln = net.lines[e];
    edges.emplace_back(ln.from, ln.to);
    off(e) = v(ln.from) * std::conj(v(ln.to));
  }
  return PartialMatrix(net.n_bus(), std::move(edges), std::move(diag),
                       std::move(off));
}

std::vector<TwoByTwoCheck> two_by_two_checks(const PartialMatrix& W,
                                             double rank1_tol) {
  std::vector<TwoByTwoCheck> out(W.n_edge());
  for (int e = 0; e < W.n_edge(); ++e) {
    const auto& [j, k] = W.edges()[e];
    const double prod = W.diag()(j) * W.diag()(k);
    const double scale = std::max(prod, 1.0);
    TwoByTwoCheck& c = out[e];
    c.gap = prod - std::norm(W.offdiag()(e));
    c.relative_gap = std::abs(c.gap) / scale;
    c.psd = c.gap >= -rank1_tol * scale;
    c.rank1 = c.relative_gap <= rank1_tol;
  }
  return out;
}

namespace {

// Node sequence root -> j via parent pointers.
std::vector<int> root_path_nodes(const TreeIndex& tree, int j) {
  std::vector<int> nodes;
  for (int u = j; u != -1; u = tree.parent[u]) nodes.push_back(u);
  std::reverse(nodes.begin(), nodes.end());
  return nodes;
}

// Tree-implied angle difference theta_a - theta_b read off the specified
// entries along the unique tree path a -> b.  Walks node pairs directly so
// the result is independent of any edge orientation.
double tree_angle_difference(const PartialMatrix& W, const TreeIndex& tree,
                             int a, int b) {
  const std::vector<int> pa = root_path_nodes(tree, a);
  const std::vector<int> pb = root_path_nodes(tree, b);
  size_t common = 0;
  while (common + 1 < pa.size() && common + 1 < pb.size() &&
         pa[common + 1] == pb[common + 1])
    ++common;
  double sum = 0.0;
  auto step = [&](int u, int w) {
    const Complex c = W.entry(u, w);
    if (c == Complex(0.0, 0.0))
      throw DomainError("cycle condition undefined: zero entry on edge (" +
                        std::to_string(u) + "," + std::to_string(w) + ")");
    sum += std::arg(c);
  };
  // Up from a to the common ancestor: each hop contributes theta_u - theta_p.
  for (size_t i = pa.size(); i-- > common + 1;) step(pa[i], pa[i - 1]);
  // Down to b: theta_p - theta_w entries enter with the same sign pattern,
  // arg W_pw = theta_p - theta_w, summed telescopes to theta_a - theta_b.
  for (size_t i = common; i + 1 < pb.size(); ++i) step(pb[i], pb[i + 1]);
  return sum;
}

}  // namespace

double WgCycleReport::max_defect() const {
  return defects.size() == 0 ? 0.0 : defects.cwiseAbs().maxCoeff();
}

WgCycleReport wg_cycle_condition(const PartialMatrix& W, const TreeIndex& tree,
                                 double angle_tol) {
  if (static_cast<int>(tree.parent.size()) != W.n_bus())
    throw DomainError("tree and partial matrix disagree on the bus count");
  WgCycleReport rep;
  rep.defects = RVec(static_cast<Eigen::Index>(tree.non_tree_edges.size()));
  for (size_t c = 0; c < tree.non_tree_edges.size(); ++c) {
    // The chord's own entry fixes one angle difference; the tree path fixes
    // another.  The basis-cycle defect is their wrapped mismatch.  Chord
    // indices address the partial matrix's edge list (same line order as
    // the orientation the tree was built on).
    const auto& [f, t] = W.edges()[tree.non_tree_edges[c]];
    const Complex chord = W.entry(f, t);
    if (chord == Complex(0.0, 0.0))
      throw DomainError("cycle condition undefined: zero entry on edge (" +
                        std::to_string(f) + "," + std::to_string(t) + ")");
    const double implied = tree_angle_difference(W, tree, f, t);
    rep.defects(static_cast<Eigen::Index>(c)) =
        wrap_angle(implied - std::arg(chord));
  }
  rep.satisfied = rep.max_defect() <= angle_tol;
  return rep;
}

CompletionResult rank1_completion(const PartialMatrix& W,
                                  const TreeIndex& tree, double rank1_tol,
                                  double angle_tol) {
  if (static_cast<int>(tree.parent.size()) != W.n_bus())
    throw DomainError("tree and partial matrix disagree on the bus count");
  if (std::abs(W.diag()(0) - 1.0) > 1e-6)
    throw DomainError("rank-1 completion assumes the slack convention "
                      "[W]_00 = 1");
  const std::vector<TwoByTwoCheck> checks = two_by_two_checks(W, rank1_tol);
  for (int e = 0; e < W.n_edge(); ++e) {
    if (!checks[e].rank1) {
      std::ostringstream msg;
      msg << "edge (" << W.edges()[e].first << "," << W.edges()[e].second
          << ") is not rank-1: relative gap " << checks[e].relative_gap;
      throw RecoveryError(msg.str());
    }
  }
  const WgCycleReport cycles = wg_cycle_condition(W, tree, angle_tol);
  if (!cycles.satisfied) {
    // Name the worst basis cycle by the chord that closes it.
    int worst = 0;
    cycles.defects.cwiseAbs().maxCoeff(&worst);
    const auto [cf, ct] = W.edges()[tree.non_tree_edges[worst]];
    std::ostringstream msg;
    msg << "cycle condition violated on the basis cycle closed by edge ("
        << cf << "," << ct << "): defect " << cycles.defects(worst);
    throw RecoveryError(msg.str());
  }

  const int n = W.n_bus();
  RVec theta = RVec::Zero(n);
  for (int j : tree.order) {
    if (tree.parent[j] == -1) continue;
    const int p = tree.parent[j];
    theta(j) = theta(p) - std::arg(W.entry(p, j));
  }
  CVec v(n);
  v(0) = Complex(1.0, 0.0);
  for (int j = 1; j < n; ++j)
    v(j) = std::polar(std::sqrt(W.diag()(j)), wrap_angle(theta(j)));
  CompletionResult out{VoltageProfile(v), CMat()};
  out.W = v * v.adjoint();
  return out;
}

namespace {

void validate_edge_list(int n_nodes,
                        const std::vector<std::pair<int, int>>& edges) {
  std::set<std::pair<int, int>> seen;
  for (const auto& [j, k] : edges) {
    if (j < 0 || j >= n_nodes || k < 0 || k >= n_nodes)
      throw DomainError("edge endpoint out of range");
    if (j == k) throw DomainError("self-loops are not allowed");
    if (!seen.insert(norm_pair(j, k)).second)
      throw DomainError("duplicate edge");
  }
}

}  // namespace

ChordalExtension chordal_extension(
    int n_nodes, const std::vector<std::pair<int, int>>& edges,
    const std::vector<int>& order) {
  if (n_nodes <= 0) throw DomainError("graph needs at least one node");
  validate_edge_list(n_nodes, edges);
  if (!order.empty()) {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n_nodes; ++i)
      if (i >= static_cast<int>(sorted.size()) || sorted[i] != i)
        throw DomainError("elimination order must be a permutation of the "
                          "node ids");
  }

  std::vector<std::set<int>> adj(n_nodes);
  for (const auto& [j, k] : edges) {
    adj[j].insert(k);
    adj[k].insert(j);
  }

  ChordalExtension ext;
  ext.n_nodes = n_nodes;
  ext.original_edges = edges;
  std::vector<bool> eliminated(n_nodes, false);
  std::vector<std::vector<int>> candidates;  // {v} + later neighbors, sorted

  for (int step = 0; step < n_nodes; ++step) {
    int v = -1;
    if (!order.empty()) {
      v = order[step];
      if (eliminated[v])
        throw DomainError("elimination order repeats a node");
    } else {
      // Minimum degree among the not-yet-eliminated, smallest id on ties.
      int best_deg = n_nodes + 1;
      for (int u = 0; u < n_nodes; ++u) {
        if (eliminated[u]) continue;
        const int deg = static_cast<int>(adj[u].size());
        if (deg < best_deg) {
          best_deg = deg;
          v = u;
        }
      }
    }

    std::vector<int> nb(adj[v].begin(), adj[v].end());
    std::vector<int> clique = nb;
    clique.push_back(v);
    std::sort(clique.begin(), clique.end());
    candidates.push_back(std::move(clique));

    // Connect the remaining neighborhood into a clique (the fill).
    for (size_t a = 0; a < nb.size(); ++a) {
      for (size_t b = a + 1; b < nb.size(); ++b) {
        const auto [lo, hi] = norm_pair(nb[a], nb[b]);
        if (adj[lo].insert(hi).second) {
          adj[hi].insert(lo);
          ext.fill_edges.emplace_back(lo, hi);
        }
      }
    }
    for (int u : nb) adj[u].erase(v);
    adj[v].clear();
    eliminated[v] = true;
    ext.elimination_order.push_back(v);
  }

  // Keep the containment-maximal candidates (they are exactly the maximal
  // cliques of the extension, since the order is a perfect elimination
  // ordering of it).
  auto contains = [](const std::vector<int>& big, const std::vector<int>& sm) {
    return std::includes(big.begin(), big.end(), sm.begin(), sm.end());
  };
  for (size_t i = 0; i < candidates.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < candidates.size() && !dominated; ++j) {
      if (i == j) continue;
      if (contains(candidates[j], candidates[i]) &&
          (candidates[j].size() > candidates[i].size() || j < i))
        dominated = true;
    }
    if (!dominated) ext.maximal_cliques.push_back(candidates[i]);
  }
  std::sort(ext.maximal_cliques.begin(), ext.maximal_cliques.end());

  for (size_t a = 0; a < ext.maximal_cliques.size(); ++a) {
    for (size_t b = a + 1; b < ext.maximal_cliques.size(); ++b) {
      std::vector<int> shared;
      std::set_intersection(
          ext.maximal_cliques[a].begin(), ext.maximal_cliques[a].end(),
          ext.maximal_cliques[b].begin(), ext.maximal_cliques[b].end(),
          std::back_inserter(shared));
      if (!shared.empty())
        ext.overlaps.push_back({static_cast<int>(a), static_cast<int>(b),
                                std::move(shared)});
    }
  }
  return ext;
}

ChordalExtension chordal_extension(const Network& net,
                                   const std::vector<int>& order) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(net.n_line());
  for (const Line& ln : net.lines) edges.emplace_back(ln.from, ln.to);
  return chordal_extension(net.n_bus(), edges, order);
}

double SdpStandardForm::Row::eval(const CMat& W) const {
  double sum = 0.0;
  for (const Term& t : terms) sum += (t.coeff * W(t.j, t.k)).real();
  return sum;
}

namespace {

// Blocks containing both endpoints, ascending block index.
std::vector<int> blocks_containing(const ChordalExtension& ext, int j, int k) {
  std::vector<int> out;
  for (size_t b = 0; b < ext.maximal_cliques.size(); ++b) {
    const auto& cl = ext.maximal_cliques[b];
    if (std::binary_search(cl.begin(), cl.end(), j) &&
        std::binary_search(cl.begin(), cl.end(), k))
      out.push_back(static_cast<int>(b));
  }
  return out;
}

}  // namespace

SdpStandardForm sdp_standard_form(const ChordalExtension& ext,
                                  const Network& net, const CostSpec& cost) {
  if (ext.n_nodes != net.n_bus())
    throw DomainError("chordal extension and network disagree on the bus "
                      "count");
  SdpStandardForm form;
  for (const auto& cl : ext.maximal_cliques) {
    form.block_sizes.push_back(static_cast<int>(cl.size()));
    form.block_nodes.push_back(cl);
  }

  // Specified entries of the extended graph, lexicographic with j <= k.
  std::vector<std::pair<int, int>> specified;
  for (int j = 0; j < ext.n_nodes; ++j) specified.emplace_back(j, j);
  for (const auto& [j, k] : ext.original_edges)
    specified.push_back(norm_pair(j, k));
  for (const auto& [j, k] : ext.fill_edges)
    specified.push_back(norm_pair(j, k));
  std::sort(specified.begin(), specified.end());

  for (const auto& [j, k] : specified) {
    const std::vector<int> blocks = blocks_containing(ext, j, k);
    if (blocks.empty())
      throw DomainError("specified entry not covered by any clique; the "
                        "extension is inconsistent");
    form.entries.push_back({j, k, blocks.front()});
    // Chain the duplicated copies across consecutive hosting blocks; the
    // two orders of an off-diagonal entry are tracked as distinct
    // decoupling variables.
    for (size_t b = 0; b + 1 < blocks.size(); ++b) {
      form.decoupling.push_back({j, k, blocks[b], blocks[b + 1]});
      if (j != k)
        form.decoupling.push_back({k, j, blocks[b], blocks[b + 1]});
    }
  }

  // Objective V^H C V = sum_j C_jj W_jj + sum_{j<k} 2 Re(C_kj W_jk).
  const CMat C = cost_matrix(net, cost);
  for (int j = 0; j < net.n_bus(); ++j) {
    if (C(j, j) != Complex(0.0, 0.0))
      form.objective.push_back({j, j, C(j, j)});
  }
  for (const auto& [j, k] : specified) {
    if (j == k) continue;
    const Complex c = C(k, j);
    if (c != Complex(0.0, 0.0)) form.objective.push_back({j, k, 2.0 * c});
  }

  // Injection windows: s_j = sum_k conj(y_jk) (W_jj - W_jk).
  for (int j = 0; j < net.n_bus(); ++j) {
    const Bus& bus = net.buses[j];
    std::vector<SdpStandardForm::Term> re_terms, im_terms;
    Complex diag_coeff(0.0, 0.0);
    for (int e = 0; e < net.n_line(); ++e) {
      const Line& ln = net.lines[e];
      if (ln.from != j && ln.to != j) continue;
      const int k = ln.from == j ? ln.to : ln.from;
      const Complex yc = std::conj(ln.y);
      diag_coeff += yc;
      re_terms.push_back({j, k, -yc});
      im_terms.push_back({j, k, Complex(0.0, -1.0) * -yc});
    }
    re_terms.insert(re_terms.begin(), {j, j, diag_coeff});
    im_terms.insert(im_terms.begin(), {j, j, Complex(0.0, -1.0) * diag_coeff});

    if (std::isfinite(bus.s_min.real()) || std::isfinite(bus.s_max.real())) {
      form.rows.push_back({re_terms, bus.s_min.real(), bus.s_max.real(),
                           "re_s[" + std::to_string(j) + "]"});
    }
    if (std::isfinite(bus.s_min.imag()) || std::isfinite(bus.s_max.imag())) {
      form.rows.push_back({im_terms, bus.s_min.imag(), bus.s_max.imag(),
                           "im_s[" + std::to_string(j) + "]"});
    }
    form.rows.push_back({{{j, j, Complex(1.0, 0.0)}}, bus.v_min, bus.v_max,
                         "v[" + std::to_string(j) + "]"});
  }
  return form;
}

std::string SdpStandardForm::to_json(bool pretty) const {
  Json doc;
  doc["blocks"] = Json::array();
  for (size_t b = 0; b < block_nodes.size(); ++b) {
    doc["blocks"].push_back(
        {{"size", block_sizes[b]}, {"nodes", block_nodes[b]}});
  }
  doc["entries"] = Json::array();
  for (const EntryHome& e : entries)
    doc["entries"].push_back({{"j", e.j}, {"k", e.k}, {"block", e.block}});
  doc["decoupling"] = Json::array();
  for (const Decoupling& d : decoupling) {
    doc["decoupling"].push_back({{"j", d.j},
                                 {"k", d.k},
                                 {"block_a", d.block_a},
                                 {"block_b", d.block_b}});
  }
  auto dump_terms = [](const std::vector<Term>& terms) {
    Json arr = Json::array();
    for (const Term& t : terms)
      arr.push_back({{"j", t.j}, {"k", t.k}, {"coeff", dump_complex(t.coeff)}});
    return arr;
  };
  doc["objective"] = dump_terms(objective);
  doc["rows"] = Json::array();
  for (const Row& r : rows) {
    doc["rows"].push_back({{"label", r.label},
                           {"lo", dump_extended(r.lo)},
                           {"hi", dump_extended(r.hi)},
                           {"terms", dump_terms(r.terms)}});
  }
  return pretty ? doc.dump(2) : doc.dump();
}

BranchFlowState wg_to_x(const PartialMatrix& W, const DirectedNetwork& dnet) {
  if (W.n_bus() != dnet.n_bus() || W.n_edge() != dnet.n_edge())
    throw DomainError("partial matrix and network shapes disagree");
  BranchFlowState x;
  x.v = W.diag();
  x.S = CVec(dnet.n_edge());
  x.ell = RVec(dnet.n_edge());
  for (int e = 0; e < dnet.n_edge(); ++e) {
    const DirectedEdge& de = dnet.edges[e];
    const Complex w_ft = W.entry(de.from, de.to);
    const double w_ff = W.diag()(de.from);
    const double w_tt = W.diag()(de.to);
    x.S(e) = std::conj(de.y) * (w_ff - w_ft);
    x.ell(e) = std::norm(de.y) * (w_ff + w_tt - 2.0 * w_ft.real());
  }
  x.s = CVec::Zero(dnet.n_bus());
  for (int e = 0; e < dnet.n_edge(); ++e) {
    const DirectedEdge& de = dnet.edges[e];
    const Complex w_ft = W.entry(de.from, de.to);
    x.s(de.from) += std::conj(de.y) * (W.diag()(de.from) - w_ft);
    x.s(de.to) += std::conj(de.y) * (W.diag()(de.to) - std::conj(w_ft));
  }
  return x;
}

PartialMatrix x_to_wg(const BranchFlowState& x, const DirectedNetwork& dnet) {
  if (x.v.size() != dnet.n_bus() ||
      x.S.size() != dnet.n_edge() || x.ell.size() != dnet.n_edge())
    throw DomainError("branch-flow state and network shapes disagree");
  RVec diag = x.v;
  CVec off(dnet.n_edge());
  std::vector<std::pair<int, int>> edges;
  edges.reserve(dnet.n_edge());
  for (int e = 0; e < dnet.n_edge(); ++e) {
    const DirectedEdge& de = dnet.edges[e];
    edges.emplace_back(de.from, de.to);
    off(e) = x.v(de.from) - std::conj(de.z) * x.S(e);
  }
  return PartialMatrix(dnet.n_bus(), std::move(edges), std::move(diag),
                       std::move(off));
}

double WgResiduals::max_abs() const {
  double m = 0.0;
  if (injection_violation.size() > 0)
    m = std::max(m, injection_violation.cwiseAbs().maxCoeff());
  if (voltage_violation.size() > 0)
    m = std::max(m, voltage_violation.cwiseAbs().maxCoeff());
  return m;
}

WgResiduals wg_constraints_residual(const PartialMatrix& W,
                                    const Network& net) {
  if (W.n_bus() != net.n_bus() || W.n_edge() != net.n_line())
    throw DomainError("partial matrix and network shapes disagree");
  CVec s = CVec::Zero(net.n_bus());
  for (int e = 0; e < net.n_line(); ++e) {
    const Line& ln = net.lines[e];
    const Complex w_ft = W.entry(ln.from, ln.to);
    s(ln.from) += std::conj(ln.y) * (W.diag()(ln.from) - w_ft);
    s(ln.to) += std::conj(ln.y) * (W.diag()(ln.to) - std::conj(w_ft));
  }
  WgResiduals res;
  res.injection_violation = CVec::Zero(net.n_bus());
  res.voltage_violation = RVec::Zero(net.n_bus());
  auto over = [](double x, double hi) {
    return std::isfinite(hi) ? std::max(0.0, x - hi) : 0.0;
  };
  auto under = [](double x, double lo) {
    return std::isfinite(lo) ? std::max(0.0, lo - x) : 0.0;
  };
  for (int j = 0; j < net.n_bus(); ++j) {
    const Bus& bus = net.buses[j];
    const double re_v = over(s(j).real(), bus.s_max.real()) +
                        under(s(j).real(), bus.s_min.real());
    const double im_v = over(s(j).imag(), bus.s_max.imag()) +
                        under(s(j).imag(), bus.s_min.imag());
    res.injection_violation(j) = Complex(re_v, im_v);
    res.voltage_violation(j) =
        over(W.diag()(j), bus.v_max) + under(W.diag()(j), bus.v_min);
  }
  return res;
}

}  // namespace opfr
