#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opfr/common.hpp"

/// Network data model, case-file I/O, edge orientation, and spanning-tree
/// indexing (paths, subtrees, incidence partition).
namespace opfr {

/// A bus with complex injection bounds and squared-voltage-magnitude bounds.
/// Infinite bound components encode "unconstrained".
struct Bus {
  int id = 0;
  Complex s_min{-kInf, -kInf};  ///< componentwise lower bound on s_j (p.u.)
  Complex s_max{kInf, kInf};    ///< componentwise upper bound on s_j (p.u.)
  double v_min = 0.81;          ///< lower bound on |V_j|^2 (p.u.^2)
  double v_max = 1.21;          ///< upper bound on |V_j|^2 (p.u.^2)
};

/// An undirected line between two buses with series impedance z and
/// admittance y = 1/z.
struct Line {
  int from = 0;
  int to = 0;
  Complex z;
  Complex y;
};

/// The single source of truth for the connected graph on buses {0,...,n}.
/// Bus 0 is the slack/root bus: it is listed first, has v_min = v_max = v0,
/// and unbounded injection by default.  Instances are immutable after
/// construction and safe to share across threads.
struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  double v0 = 1.0;  ///< squared slack voltage magnitude (p.u.^2)

  /// Number of buses including the slack (|N+| = n + 1).
  int n_bus() const { return static_cast<int>(buses.size()); }
  /// Number of non-slack buses (n).
  int n() const { return n_bus() - 1; }
  /// Number of lines (m).
  int n_line() const { return static_cast<int>(lines.size()); }
  /// True when the graph is a tree (m == n; validated nets are connected).
  bool is_radial() const { return n_line() == n(); }

  /// Index of the line joining buses j and k in either order, or -1.
  int line_between(int j, int k) const;
  /// (neighbor bus, line index) pairs for bus j, ascending by neighbor id.
  std::vector<std::pair<int, int>> neighbors(int j) const;

  /// Checks every type invariant (ids contiguous and in listed order,
  /// connectivity, no self-loops or duplicate lines, bound ordering,
  /// v_min > 0, slack conventions, y*z == 1).  Throws CaseError.
  void validate() const;
};

/// Parse the JSON case schema (see README) into a validated Network.
/// Throws ParseError on syntax problems and CaseError on invariant
/// violations.  Defaults: v0 = 1; missing s bounds are unbounded; missing
/// v bounds are [0.81, 1.21] except bus 0 which is pinned to v0.
Network parse_case(const std::string& text);

/// Serialize a Network back to case-file JSON.  parse_case(serialize_case(n))
/// reproduces n exactly.
std::string serialize_case(const Network& net, bool pretty = false);

enum class OrientMode {
  away_from_root,  ///< every edge points from parent to child (trees only)
  toward_root,     ///< every edge points from child to parent (trees only)
  as_listed,       ///< every line keeps its (from, to) order from the case
};

/// One directed edge j -> k carrying the underlying line's impedance.
struct DirectedEdge {
  int from = 0;
  int to = 0;
  int line = 0;  ///< index into Network::lines
  Complex z;
  Complex y;
};

/// A Network plus a fixed orientation of each edge.  Edge order follows
/// Network::lines, so states indexed by edge stay comparable across
/// orientations of the same network.
class DirectedNetwork {
 public:
  Network base;
  std::vector<DirectedEdge> edges;

  DirectedNetwork() = default;
  DirectedNetwork(Network b, std::vector<DirectedEdge> e);

  int n_bus() const { return base.n_bus(); }
  int n_edge() const { return static_cast<int>(edges.size()); }
  /// Edge indices with from == j, ascending.
  const std::vector<int>& out_edges(int j) const { return out_lists_[j]; }
  /// Edge indices with to == j, ascending.
  const std::vector<int>& in_edges(int j) const { return in_lists_[j]; }

 private:
  std::vector<std::vector<int>> out_lists_, in_lists_;
};

/// Orient every edge of `net` per `mode`.  away/toward modes require a
/// radial network and throw DomainError otherwise; toward_root is the exact
/// edge-reversal of away_from_root.
DirectedNetwork orient(const Network& net, OrientMode mode);

/// The same network with every edge reversed (edge order preserved).
DirectedNetwork reversed(const DirectedNetwork& dnet);

/// Spanning-tree index rooted at bus 0: parent/children maps, root->j paths,
/// subtrees, the tree / non-tree edge partition, and the reduced incidence
/// matrix B (m x n over non-slack buses) split into B_T and B_perp.
///
/// B_T^{-1} is built from the path structure rather than by factorization:
/// entry (j, e) is -1 when tree edge e lies on the root->j path and is
/// traversed along its own direction, +1 when traversed against it, else 0.
/// For away-from-root orientations every entry is therefore 0 or -1.
struct TreeIndex {
  std::vector<int> parent;       ///< parent bus id; -1 for the root
  std::vector<int> parent_edge;  ///< edge index to parent; -1 for the root
  std::vector<std::vector<int>> children;       ///< child bus ids, ascending
  std::vector<std::vector<int>> path;           ///< P_j: edge indices, root->j order
  std::vector<std::vector<int>> subtree_nodes;  ///< T_j node set incl. j, ascending
  std::vector<std::vector<int>> subtree_edges;  ///< tree edges with both ends in T_j
  std::vector<int> tree_edges;      ///< edge indices in E_T (size n)
  std::vector<int> non_tree_edges;  ///< edge indices in T-perp (size m - n)
  std::vector<int> order;           ///< bus ids in BFS order from the root
  RMat B;        ///< m x n reduced incidence matrix (column j-1 for bus j)
  RMat B_T;      ///< rows of B for tree edges, in tree_edges order
  RMat B_perp;   ///< rows of B for non-tree edges
  RMat B_T_inv;  ///< inverse of B_T from the path formula

  /// True when edge e is a tree edge.
  bool is_tree_edge(int e) const;
};

/// BFS spanning tree from bus 0 with ascending-id tie-break; deterministic.
/// Requires a connected network (validated Networks always are).
TreeIndex spanning_tree(const DirectedNetwork& dnet);

/// Injections of buses whose bounds pin s exactly (s_min == s_max, finite).
/// Every non-slack bus must be pinned; entry 0 is set to 0 (the slack
/// injection is an output of power flow, not an input).  Throws DomainError
/// when some non-slack bus has a window instead of a fixed value.
CVec fixed_injections(const Network& net);

}  // namespace opfr
