#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opfr/bfm.hpp"
#include "opfr/cost.hpp"
#include "opfr/netmodel.hpp"

/// Partial Hermitian matrices on graphs: feasibility constraints, 2x2
/// psd/rank-1 tests, cycle condition, rank-1 completion, chordal extensions
/// with clique enumeration, standard-form SDP conversion with decoupling
/// variables, and the linear maps to and from branch-flow states.
namespace opfr {

/// A Hermitian partial matrix specified on a graph: real positive diagonal
/// over all buses plus one complex entry [W]_jk per edge, stored for the
/// edge's (from, to) order; [W]_kj = conj([W]_jk) is implicit.
class PartialMatrix {
 public:
  /// `edges` lists (from, to) pairs in a fixed order (normally
  /// Network::lines order so edge indices stay aligned with TreeIndex).
  /// Throws DomainError unless every diagonal entry is strictly positive.
  PartialMatrix(int n_bus, std::vector<std::pair<int, int>> edges, RVec diag,
                CVec offdiag);

  int n_bus() const { return n_bus_; }
  int n_edge() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const RVec& diag() const { return diag_; }
  const CVec& offdiag() const { return offdiag_; }

  /// [W]_jk for j == k or {j,k} an edge (conjugated as needed); throws
  /// DomainError for unspecified entries.
  Complex entry(int j, int k) const;
  /// Index of the edge between j and k in either order, or -1.
  int edge_between(int j, int k) const;

 private:
  int n_bus_;
  std::vector<std::pair<int, int>> edges_;
  RVec diag_;
  CVec offdiag_;
};

/// Per-edge principal 2x2 submatrix verdicts.
struct TwoByTwoCheck {
  bool psd = false;    ///< W_jj W_kk >= |W_jk|^2
  bool rank1 = false;  ///< equality within the relative tolerance
  double gap = 0.0;    ///< W_jj W_kk - |W_jk|^2
  double relative_gap = 0.0;  ///< |gap| / max(W_jj W_kk, 1)
};

/// Cycle condition over the basis cycles induced by a spanning tree.
struct WgCycleReport {
  bool satisfied = false;
  RVec defects;  ///< per non-tree edge (tree.non_tree_edges order), wrapped
  double max_defect() const;
};

/// A rank-1 completion: the voltage profile and the full matrix V V^H.
struct CompletionResult {
  VoltageProfile V;
  CMat W;
};

/// A chordal extension of a graph with its perfect elimination ordering and
/// maximal clique structure.
struct ChordalExtension {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> original_edges;
  std::vector<std::pair<int, int>> fill_edges;
  std::vector<int> elimination_order;  ///< perfect elimination ordering
  std::vector<std::vector<int>> maximal_cliques;  ///< each ascending

  /// Shared node sets between every pair of overlapping maximal cliques.
  struct Overlap {
    int clique_a = 0;
    int clique_b = 0;
    std::vector<int> shared;
  };
  std::vector<Overlap> overlaps;

  int n_fill() const { return static_cast<int>(fill_edges.size()); }
};

/// Standard-form conversion of the clique-decomposed SDP: one psd block per
/// maximal clique, duplicated entries turned into decoupling variables tied
/// together by equality constraints.  Built and verified structurally; never
/// solved numerically here.
struct SdpStandardForm {
  /// A linear term Re(coeff * W_jk); rows and the objective are sums of
  /// these over specified entries of the original graph.
  struct Term {
    int j = 0;
    int k = 0;
    Complex coeff;
  };
  /// lo <= sum(terms) <= hi.
  struct Row {
    std::vector<Term> terms;
    double lo = -kInf;
    double hi = kInf;
    std::string label;
    double eval(const CMat& W) const;
  };
  /// A duplicated entry (j,k): its copy in block_b must equal the copy in
  /// block_a.  Ordered off-diagonal pairs are recorded separately ((j,k) and
  /// (k,j) are distinct decoupling variables); diagonals once per node pair
  /// of blocks.
  struct Decoupling {
    int j = 0;
    int k = 0;
    int block_a = 0;
    int block_b = 0;
  };
  /// Home block of each extended-graph entry (j <= k): the first maximal
  /// clique containing both endpoints.
  struct EntryHome {
    int j = 0;
    int k = 0;
    int block = 0;
  };

  std::vector<int> block_sizes;                ///< per maximal clique
  std::vector<std::vector<int>> block_nodes;   ///< = maximal cliques
  std::vector<EntryHome> entries;
  std::vector<Decoupling> decoupling;
  std::vector<Term> objective;
  std::vector<Row> rows;

  int decoupling_count() const { return static_cast<int>(decoupling.size()); }
  /// JSON problem dump (schema in the README) for external SDP solvers.
  std::string to_json(bool pretty = false) const;
};

/// Per-bus constraint-violation amounts for a partial matrix against the
/// network's injection and voltage windows (0 where satisfied).
struct WgResiduals {
  CVec injection_violation;  ///< componentwise positive violation amounts
  RVec voltage_violation;
  double max_abs() const;
};

/// [W]_jj = |V_j|^2, [W]_jk = V_j conj(V_k) on the network's edges.
PartialMatrix partial_from_voltage(const Network& net,
                                   const VoltageProfile& V);

/// psd / rank-1 verdicts of every edge's principal 2x2 submatrix.
std::vector<TwoByTwoCheck> two_by_two_checks(const PartialMatrix& W,
                                             double rank1_tol = 1e-8);

/// Sum of entry angles around each basis cycle (one per non-tree edge),
/// wrapped to (-pi, pi]; satisfied iff every defect is within angle_tol.
/// Radial graphs are vacuously satisfied.  Throws DomainError when a
/// traversed entry is zero (angle undefined).
WgCycleReport wg_cycle_condition(const PartialMatrix& W, const TreeIndex& tree,
                                 double angle_tol = 1e-6);

/// The unique psd rank-1 completion: |V_j| = sqrt(W_jj) with angles
/// accumulated along tree paths.  Requires every edge 2x2-rank-1 and the
/// cycle condition; throws RecoveryError naming the offending edge or cycle
/// otherwise.  Requires W_00 = 1 (slack convention) within 1e-6.
CompletionResult rank1_completion(const PartialMatrix& W,
                                  const TreeIndex& tree,
                                  double rank1_tol = 1e-8,
                                  double angle_tol = 1e-6);

/// Chordal extension by elimination.  With `order` empty, minimum-degree
/// with ascending-id tie-break; otherwise `order` is the elimination order
/// to use (a permutation of 0..n_nodes-1).  The result's ordering is a
/// perfect elimination ordering of the extended graph by construction.
ChordalExtension chordal_extension(int n_nodes,
                                   const std::vector<std::pair<int, int>>& edges,
                                   const std::vector<int>& order = {});
ChordalExtension chordal_extension(const Network& net,
                                   const std::vector<int>& order = {});

/// Clique-decomposed standard form with decoupling equalities, objective and
/// injection/voltage windows rewritten onto block entries.
SdpStandardForm sdp_standard_form(const ChordalExtension& ext,
                                  const Network& net, const CostSpec& cost);

/// The linear map from partial matrices to branch-flow states:
/// S_jk = conj(y_jk)([W]_jj - [W]_jk), l_jk = |y_jk|^2 ([W]_jj + [W]_kk -
/// [W]_jk - [W]_kj), v_j = [W]_jj, s_j from the injection sums.
BranchFlowState wg_to_x(const PartialMatrix& W, const DirectedNetwork& dnet);

/// Its inverse: [W]_jj = v_j, [W]_jk = v_j - conj(z_jk) S_jk (stored in the
/// dnet edge orientation).
PartialMatrix x_to_wg(const BranchFlowState& x, const DirectedNetwork& dnet);

/// Violation amounts of the injection/voltage windows at W.
WgResiduals wg_constraints_residual(const PartialMatrix& W, const Network& net);

}  // namespace opfr
