#include "opfr/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace opfr {

using nlohmann::json;

int Network::line_between(int j, int k) const {
  for (int e = 0; e < n_line(); ++e) {
    const Line& l = lines[e];
    if ((l.from == j && l.to == k) || (l.from == k && l.to == j)) return e;
  }
  return -1;
}

std::vector<std::pair<int, int>> Network::neighbors(int j) const {
  std::vector<std::pair<int, int>> out;
  for (int e = 0; e < n_line(); ++e) {
    if (lines[e].from == j) out.emplace_back(lines[e].to, e);
    if (lines[e].to == j) out.emplace_back(lines[e].from, e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Network::validate() const {
  if (buses.empty()) throw CaseError("case has no buses");
  for (int j = 0; j < n_bus(); ++j) {
    if (buses[j].id != j)
      throw CaseError("bus ids must be 0..n in listed order; position " +
                      std::to_string(j) + " has id " +
                      std::to_string(buses[j].id));
  }
  if (!(v0 > 0)) throw CaseError("v0 must be positive");
  for (const Bus& b : buses) {
    if (!(b.v_min > 0))
      throw CaseError("bus " + std::to_string(b.id) + ": v_min must be > 0");
    if (!(b.v_min <= b.v_max))
      throw CaseError("bus " + std::to_string(b.id) + ": v_min > v_max");
    if (!(b.s_min.real() <= b.s_max.real()) ||
        !(b.s_min.imag() <= b.s_max.imag()))
      throw CaseError("bus " + std::to_string(b.id) +
                      ": s_min exceeds s_max componentwise");
  }
  if (buses[0].v_min != v0 || buses[0].v_max != v0)
    throw CaseError("slack bus 0 must have v_min = v_max = v0");

  std::set<std::pair<int, int>> seen;
  for (int e = 0; e < n_line(); ++e) {
    const Line& l = lines[e];
    if (l.from < 0 || l.from >= n_bus() || l.to < 0 || l.to >= n_bus())
      throw CaseError("line " + std::to_string(e) + ": endpoint out of range");
    if (l.from == l.to)
      throw CaseError("line " + std::to_string(e) + ": self-loop at bus " +
                      std::to_string(l.from));
    auto key = std::minmax(l.from, l.to);
    if (!seen.insert(key).second)
      throw CaseError("duplicate line between buses " +
                      std::to_string(key.first) + " and " +
                      std::to_string(key.second));
    if (!std::isfinite(l.y.real()) || !std::isfinite(l.y.imag()) ||
        l.y == Complex(0, 0))
      throw CaseError("line " + std::to_string(e) +
                      ": admittance must be finite and nonzero");
    if (std::abs(l.y * l.z - Complex(1, 0)) > 1e-12)
      throw CaseError("line " + std::to_string(e) + ": y*z != 1");
  }

  // Connectivity by BFS from bus 0.
  std::vector<char> visited(n_bus(), 0);
  std::deque<int> queue{0};
  visited[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    for (auto [k, e] : neighbors(j)) {
      (void)e;
      if (!visited[k]) {
        visited[k] = 1;
        ++count;
        queue.push_back(k);
      }
    }
  }
  if (count != n_bus()) throw CaseError("graph is not connected");
}

namespace {

// Reads a complex bound [re, im] where the whole value or a component may be
// null (meaning unconstrained).  `sign` selects -inf or +inf defaults.
Complex parse_bound(const json& j, double sign) {
  const double inf = sign * kInf;
  if (j.is_null()) return {inf, inf};
  if (!j.is_array() || j.size() != 2)
    throw CaseError("complex bound must be [re, im] or null");
  double re = j[0].is_null() ? inf : j[0].get<double>();
  double im = j[1].is_null() ? inf : j[1].get<double>();
  return {re, im};
}

Complex parse_complex(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || j[0].is_null() || j[1].is_null())
    throw CaseError(std::string(what) + " must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json dump_bound(Complex c) {
  json out = json::array();
  if (std::isfinite(c.real()))
    out.push_back(c.real());
  else
    out.push_back(nullptr);
  if (std::isfinite(c.imag()))
    out.push_back(c.imag());
  else
    out.push_back(nullptr);
  return out;
}

}  // namespace

Network parse_case(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("case syntax error: ") + err.what(),
                     static_cast<long>(err.byte));
  }
  try {
    Network net;
    net.v0 = doc.value("v0", 1.0);
    if (!doc.contains("buses") || !doc["buses"].is_array())
      throw CaseError("case must contain a \"buses\" array");
    if (!doc.contains("lines") || !doc["lines"].is_array())
      throw CaseError("case must contain a \"lines\" array");
    for (const json& jb : doc["buses"]) {
      Bus b;
      b.id = jb.at("id").get<int>();
      if (jb.contains("s_min")) b.s_min = parse_bound(jb["s_min"], -1.0);
      if (jb.contains("s_max")) b.s_max = parse_bound(jb["s_max"], +1.0);
      const bool slack = net.buses.empty();
      b.v_min = jb.value("v_min", slack ? net.v0 : 0.81);
      b.v_max = jb.value("v_max", slack ? net.v0 : 1.21);
      net.buses.push_back(b);
    }
    for (const json& jl : doc["lines"]) {
      Line l;
      l.from = jl.at("from").get<int>();
      l.to = jl.at("to").get<int>();
      l.z = parse_complex(jl.at("z"), "line impedance z");
      if (l.z == Complex(0, 0))
        throw CaseError("line impedance must be nonzero");
      l.y = Complex(1, 0) / l.z;
      net.lines.push_back(l);
    }
    net.validate();
    return net;
  } catch (const json::exception& err) {
    throw CaseError(std::string("case field error: ") + err.what());
  }
}

std::string serialize_case(const Network& net, bool pretty) {
  json doc;
  doc["v0"] = net.v0;
  doc["buses"] = json::array();
  for (const Bus& b : net.buses) {
    json jb;
    jb["id"] = b.id;
    jb["s_min"] = dump_bound(b.s_min);
    jb["s_max"] = dump_bound(b.s_max);
    jb["v_min"] = b.v_min;
    jb["v_max"] = b.v_max;
    doc["buses"].push_back(jb);
  }
  doc["lines"] = json::array();
  for (const Line& l : net.lines) {
    json jl;
    jl["from"] = l.from;
    jl["to"] = l.to;
    jl["z"] = {l.z.real(), l.z.imag()};
    doc["lines"].push_back(jl);
  }
  return pretty ? doc.dump(2) : doc.dump();
}

DirectedNetwork::DirectedNetwork(Network b, std::vector<DirectedEdge> e)
    : base(std::move(b)), edges(std::move(e)) {
  out_lists_.assign(base.n_bus(), {});
  in_lists_.assign(base.n_bus(), {});
  for (int i = 0; i < n_edge(); ++i) {
    out_lists_[edges[i].from].push_back(i);
    in_lists_[edges[i].to].push_back(i);
  }
}

namespace {

// BFS from bus 0 with ascending-id tie-break.  Returns parent bus and the
// connecting line index for every bus (-1 for the root).
void bfs_tree(const Network& net, std::vector<int>& parent,
              std::vector<int>& parent_line, std::vector<int>& order) {
  parent.assign(net.n_bus(), -1);
  parent_line.assign(net.n_bus(), -1);
  order.clear();
  std::vector<char> visited(net.n_bus(), 0);
  std::deque<int> queue{0};
  visited[0] = 1;
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    order.push_back(j);
    for (auto [k, e] : net.neighbors(j)) {  // ascending by neighbor id
      if (!visited[k]) {
        visited[k] = 1;
        parent[k] = j;
        parent_line[k] = e;
        queue.push_back(k);
      }
    }
  }
  if (static_cast<int>(order.size()) != net.n_bus())
    throw DomainError("network is not connected");
}

}  // namespace

DirectedNetwork orient(const Network& net, OrientMode mode) {
  std::vector<DirectedEdge> edges(net.n_line());
  if (mode == OrientMode::as_listed) {
    for (int e = 0; e < net.n_line(); ++e) {
      const Line& l = net.lines[e];
      edges[e] = DirectedEdge{l.from, l.to, e, l.z, l.y};
    }
    return DirectedNetwork(net, std::move(edges));
  }
  if (!net.is_radial())
    throw DomainError(
        "away_from_root/toward_root orientation requires a radial network");
  std::vector<int> parent, parent_line, order;
  bfs_tree(net, parent, parent_line, order);
  for (int k = 1; k < net.n_bus(); ++k) {
    int e = parent_line[k];
    const Line& l = net.lines[e];
    if (mode == OrientMode::away_from_root)
      edges[e] = DirectedEdge{parent[k], k, e, l.z, l.y};
    else
      edges[e] = DirectedEdge{k, parent[k], e, l.z, l.y};
  }
  return DirectedNetwork(net, std::move(edges));
}

DirectedNetwork reversed(const DirectedNetwork& dnet) {
  std::vector<DirectedEdge> edges = dnet.edges;
  for (DirectedEdge& e : edges) std::swap(e.from, e.to);
  return DirectedNetwork(dnet.base, std::move(edges));
}

bool TreeIndex::is_tree_edge(int e) const {
  return std::binary_search(tree_edges.begin(), tree_edges.end(), e);
}

TreeIndex spanning_tree(const DirectedNetwork& dnet) {
  const Network& net = dnet.base;
  const int nb = net.n_bus();
  const int n = net.n();
  const int m = dnet.n_edge();

  TreeIndex t;
  std::vector<int> parent_line;
  bfs_tree(net, t.parent, parent_line, t.order);

  // Line index == edge index by construction of DirectedNetwork.
  t.parent_edge = parent_line;
  t.children.assign(nb, {});
  for (int k = 1; k < nb; ++k) t.children[t.parent[k]].push_back(k);
  for (auto& c : t.children) std::sort(c.begin(), c.end());

  t.path.assign(nb, {});
  for (int j : t.order) {
    if (j == 0) continue;
    t.path[j] = t.path[t.parent[j]];
    t.path[j].push_back(t.parent_edge[j]);
  }

  t.subtree_nodes.assign(nb, {});
  t.subtree_edges.assign(nb, {});
  for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
    int j = *it;
    t.subtree_nodes[j].push_back(j);
    for (int c : t.children[j]) {
      t.subtree_nodes[j].insert(t.subtree_nodes[j].end(),
                                t.subtree_nodes[c].begin(),
                                t.subtree_nodes[c].end());
      t.subtree_edges[j].push_back(t.parent_edge[c]);
      t.subtree_edges[j].insert(t.subtree_edges[j].end(),
                                t.subtree_edges[c].begin(),
                                t.subtree_edges[c].end());
    }
    std::sort(t.subtree_nodes[j].begin(), t.subtree_nodes[j].end());
    std::sort(t.subtree_edges[j].begin(), t.subtree_edges[j].end());
  }

  std::vector<char> in_tree(m, 0);
  for (int k = 1; k < nb; ++k) in_tree[t.parent_edge[k]] = 1;
  for (int e = 0; e < m; ++e)
    (in_tree[e] ? t.tree_edges : t.non_tree_edges).push_back(e);

  t.B = RMat::Zero(m, n);
  for (int e = 0; e < m; ++e) {
    if (dnet.edges[e].from != 0) t.B(e, dnet.edges[e].from - 1) = 1.0;
    if (dnet.edges[e].to != 0) t.B(e, dnet.edges[e].to - 1) = -1.0;
  }
  t.B_T = RMat::Zero(n, n);
  for (int r = 0; r < n; ++r) t.B_T.row(r) = t.B.row(t.tree_edges[r]);
  t.B_perp = RMat::Zero(m - n, n);
  for (int r = 0; r < m - n; ++r)
    t.B_perp.row(r) = t.B.row(t.non_tree_edges[r]);

  // Path-formula inverse: row j-1 holds the signed indicator of the
  // root->j path; tree edges traversed along their own direction get -1,
  // against it +1.
  t.B_T_inv = RMat::Zero(n, n);
  std::vector<int> pos(m, -1);
  for (int r = 0; r < n; ++r) pos[t.tree_edges[r]] = r;
  for (int j = 1; j < nb; ++j) {
    int node = 0;
    for (int e : t.path[j]) {
      const DirectedEdge& de = dnet.edges[e];
      const bool along = (de.from == node);
      t.B_T_inv(j - 1, pos[e]) = along ? -1.0 : 1.0;
      node = along ? de.to : de.from;
    }
  }
  return t;
}

CVec fixed_injections(const Network& net) {
  CVec s = CVec::Zero(net.n_bus());
  for (int j = 1; j < net.n_bus(); ++j) {
    const Bus& b = net.buses[j];
    if (b.s_min != b.s_max || !std::isfinite(b.s_min.real()) ||
        !std::isfinite(b.s_min.imag()))
      throw DomainError("bus " + std::to_string(j) +
                        ": injection is not fixed (s_min != s_max)");
    s(j) = b.s_min;
  }
  return s;
}

}  // namespace opfr
