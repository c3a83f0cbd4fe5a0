#pragma once

#include <optional>
#include <string>
#include <vector>

#include "opfr/bfm.hpp"
#include "opfr/cost.hpp"
#include "opfr/netmodel.hpp"
#include "opfr/pmatrix.hpp"
#include "opfr/radial.hpp"
#include "opfr/socp.hpp"

/// OPF SOCP relaxations in both models: builders, exactness checking,
/// feasible-solution recovery, and a brute-force optimum for tiny instances.
namespace opfr {

enum class Model { bfm, bim };

/// The branch-flow SOCP with its variable index maps (one index per listed
/// quantity; -1 never appears, every variable is materialized).
struct BfmSocp {
  socp::ConeProblem problem;
  DirectedNetwork dnet;
  std::vector<int> re_S, im_S, ell;  ///< per edge
  std::vector<int> v, re_s, im_s;    ///< per bus

  /// Read a solver point back into branch-flow coordinates.
  BranchFlowState extract(const RVec& x) const;
};

/// The partial-matrix SOCP with its index maps.
struct BimSocp {
  socp::ConeProblem problem;
  DirectedNetwork dnet;
  std::vector<int> w_diag;       ///< per bus
  std::vector<int> re_w, im_w;   ///< per edge, in the dnet orientation
  std::vector<int> re_s, im_s;   ///< per bus

  /// Read a solver point back into a partial matrix.
  PartialMatrix extract(const RVec& x) const;
};

/// Why (or whether) a relaxation solution is a power-flow solution.
struct ExactnessReport {
  enum class Verdict { exact, inexact_cone, inexact_cycle };

  RVec cone_gap;            ///< per edge: v_j l_jk - |S_jk|^2
  std::vector<bool> tight;  ///< per edge: gap within tolerance
  bool radial = true;
  AngleRecoveryResult cycle;  ///< meaningful for meshes; trees auto-satisfy
  Verdict verdict = Verdict::inexact_cone;
  double tol = 1e-6;

  bool exact() const { return verdict == Verdict::exact; }
  static std::string verdict_name(Verdict v);
};

/// Outcome of one relaxation solve.
struct OpfResult {
  Model model = Model::bfm;
  double objective = kInf;
  ExactnessReport exactness;
  BranchFlowState x;  ///< the optimal point in branch-flow coordinates
  std::optional<ComplexState> recovered;  ///< present iff verdict is exact
  socp::ConeSolution solution;
};

/// Assemble the branch-flow SOCP: variables (Re S, Im S, l) per edge and
/// (v, Re s, Im s) per bus; power balance and voltage drop as equalities,
/// v_0 pinned to the network's v0; one rotated cone ||S_jk||^2 <= v_j l_jk
/// per edge; injection/voltage boxes; objective per the cost spec.
BfmSocp build_bfm_socp(const Network& net, const CostSpec& cost);

/// Assemble the partial-matrix SOCP: variables [W]_jj per bus and
/// Re/Im [W]_jk per edge plus explicit injection variables tied to W by the
/// defining equalities; rotated cone |[W]_jk|^2 <= [W]_jj [W]_kk per edge;
/// windows as boxes; objective per the cost spec.
BimSocp build_bim_socp(const Network& net, const CostSpec& cost);

/// Per-edge cone gaps plus the cycle condition (meshes); verdict exact when
/// every edge is tight within tol and the cycle condition holds.
ExactnessReport check_exactness(const DirectedNetwork& dnet,
                                const BranchFlowState& x,
                                const TreeIndex& tree, double tol = 1e-6,
                                double angle_tol = 1e-6);

/// Recover a complex power-flow solution from an exact branch-flow point
/// (angle recovery route).  Refuses inexact reports with a RecoveryError
/// describing the verdict.
ComplexState recover_solution(const DirectedNetwork& dnet,
                              const TreeIndex& tree, const BranchFlowState& x,
                              const ExactnessReport& report,
                              double angle_tol = 1e-6);

/// Recover from a partial-matrix point (rank-1 completion route); the two
/// routes agree within 1e-7 on exact instances.
ComplexState recover_solution_wg(const DirectedNetwork& dnet,
                                 const TreeIndex& tree, const PartialMatrix& W,
                                 double rank1_tol = 1e-6,
                                 double angle_tol = 1e-6);

/// Objective value of a branch-flow point under a cost spec (total_loss is
/// the sum of Re(z) l over edges).
double evaluate_cost(const DirectedNetwork& dnet, const CostSpec& cost,
                     const BranchFlowState& x);

/// Build, solve, check exactness, and (when exact) recover -- the
/// everything-wired pipeline used by the CLI.
OpfResult solve_opf(const Network& net, Model model, const CostSpec& cost,
                    const socp::SolverOptions& solver_opts = {},
                    double exact_tol = 1e-6, double angle_tol = 1e-6);

/// Grid-search optimum for tiny radial instances (n <= 3, bounded boxes):
/// sweep injections over a per-component grid, solve each radial power flow,
/// keep the best feasible cost, then polish locally.  grid_slack is a
/// first-order Lipschitz estimate of the error of the grid optimum.
struct BruteForceResult {
  bool feasible = false;
  double cost = kInf;
  CVec s;  ///< best injections (entry 0 = computed slack injection)
  BranchFlowState x;
  double grid_slack = 0.0;
  long n_evaluated = 0;
  long n_feasible = 0;
};

BruteForceResult brute_force_opf(const Network& net, const CostSpec& cost,
                                 int grid_points = 9);

}  // namespace opfr
