#include <cmath>

#include "doctest.h"
#include "opfr/generate.hpp"
#include "opfr/radial.hpp"
#include "support.hpp"

using namespace opfr;
using testutil::load_case;
namespace oracle = testutil::oracle;

namespace {

CVec two_bus_injections() {
  CVec s(2);
  s << Complex(0, 0), Complex(-0.1, -0.05);
  return s;
}

}  // namespace

TEST_CASE("distflow residual flags exactly the violated family") {
  Network net = load_case("two_bus.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  BranchFlowState x = solve_radial(net, two_bus_injections());
  CHECK(distflow_residual(dnet, x).max_abs() < 1e-10);

  // Inflate l and compensate balance and drop at the receiving end: only the
  // quadratic equality is left violated, and in the relaxed direction.
  const double delta = 0.01;
  BranchFlowState relaxed = x;
  relaxed.ell(0) += delta;
  relaxed.s(1) += dnet.edges[0].z * delta;
  relaxed.v(1) += std::norm(dnet.edges[0].z) * delta;
  DistflowResiduals r = distflow_residual(dnet, relaxed);
  CHECK(r.balance.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.drop.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.quad(0) > 0.9 * delta * x.v(0));
}

TEST_CASE("sweep solve matches the frozen two-bus solution") {
  Network net = load_case("two_bus.json");
  BranchFlowState x = solve_radial(net, two_bus_injections());
  CHECK(std::abs(x.ell(0) - oracle::kTwoBusEll) < 1e-14);
  CHECK(std::abs(x.v(1) - oracle::kTwoBusV1) < 1e-14);
  CHECK(std::abs(x.S(0).real() - oracle::kTwoBusS01Re) < 1e-14);
  CHECK(std::abs(x.S(0).imag() - oracle::kTwoBusS01Im) < 1e-14);
  // Slack injection = sending-end power.
  CHECK(std::abs(x.s(0) - x.S(0)) == 0.0);
  // And against a freshly run test-local fixed point, not just the constants.
  oracle::TwoBus fp =
      oracle::two_bus(Complex(-0.1, -0.05), Complex(0.01, 0.02), 1.0);
  CHECK(std::abs(x.ell(0) - fp.ell) < 1e-14);
  CHECK(std::abs(x.v(1) - fp.v1) < 1e-14);
}

TEST_CASE("zero injections give the flat solution exactly") {
  Network net = load_case("feeder5.json");
  BranchFlowState x = solve_radial(net, CVec::Zero(5));
  CHECK(x.S.cwiseAbs().maxCoeff() == 0.0);
  CHECK(x.ell.maxCoeff() == 0.0);
  CHECK((x.v - RVec::Constant(5, 1.0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(x.s(0)) == 0.0);
}

TEST_CASE("overload does not converge and meshes are rejected") {
  SUBCASE("absurd load collapses the voltage") {
    Network net = load_case("two_bus.json");
    CVec s(2);
    s << Complex(0, 0), Complex(-60.0, -30.0);
    CHECK_THROWS_AS(solve_radial(net, s), ConvergenceError);
  }
  SUBCASE("mesh input is a domain error") {
    Network net = load_case("three_ring.json");
    CHECK_THROWS_AS(solve_radial(net, CVec::Zero(3)), DomainError);
  }
}

TEST_CASE("sweep fixed point zeroes the distflow residual on random trees") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const int nb = rng.uniform_int(2, 12);
    Network net = random_tree(rng, nb);
    DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
    CVec s = fixed_injections(net);
    BranchFlowState x = solve_radial(net, s);
    CHECK(distflow_residual(dnet, x).max_abs() < 1e-10);
    CHECK(x.v.minCoeff() > 0.0);
    CHECK(x.ell.minCoeff() >= 0.0);
  }
}

TEST_CASE("linear distflow has the closed form on two buses") {
  Network net = load_case("two_bus.json");
  LinearState lin = solve_linear_distflow(net, two_bus_injections());
  CHECK(std::abs(lin.S_lin(0) - Complex(0.1, 0.05)) == 0.0);
  // v1 = 1 - 2 Re(conj(z) S_lin) = 1 - 2 (0.01*0.1 + 0.02*0.05)
  CHECK(std::abs(lin.v_lin(1) - 0.996) < 1e-15);
  CHECK(lin.v_lin(0) == 1.0);
}

TEST_CASE("linear distflow sums subtree loads on the feeder") {
  Network net = load_case("feeder5.json");
  CVec s = fixed_injections(net);
  LinearState lin = solve_linear_distflow(net, s);
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  TreeIndex tree = spanning_tree(dnet);
  for (int e = 0; e < dnet.n_edge(); ++e) {
    Complex sum(0, 0);
    for (int k : tree.subtree_nodes[dnet.edges[e].to]) sum += s(k);
    CHECK(std::abs(lin.S_lin(e) + sum) < 1e-15);
  }
  // Deeper buses see weakly lower linear voltage when all buses draw power.
  for (int j = 1; j < net.n_bus(); ++j)
    CHECK(lin.v_lin(j) <= lin.v_lin(tree.parent[j]) + 1e-15);
}

TEST_CASE("reverse linear solve negates flows and keeps voltages") {
  Rng rng(113);
  for (int trial = 0; trial < 8; ++trial) {
    Network net = random_tree(rng, rng.uniform_int(2, 10));
    CVec s = fixed_injections(net);
    LinearState fwd = solve_linear_distflow(net, s);
    LinearState rev = solve_linear_reverse(net, s);
    CHECK((rev.S_lin + fwd.S_lin).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((rev.v_lin - fwd.v_lin).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("bound report on the two-bus oracle") {
  Network net = load_case("two_bus.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  TreeIndex tree = spanning_tree(dnet);
  CVec s = two_bus_injections();
  BranchFlowState x = solve_radial(net, s);
  LinearState lin = solve_linear_distflow(net, s);
  BoundReport rep = check_bounds(dnet, x, lin, tree);

  CHECK(rep.ok());
  CHECK(rep.max_identity_residual() < 1e-12);
  // The gaps are exactly the loss terms.
  const Complex zl = dnet.edges[0].z * x.ell(0);
  CHECK(std::abs(rep.flow_gap_re(0) - zl.real()) < 1e-14);
  CHECK(std::abs(rep.flow_gap_im(0) - zl.imag()) < 1e-14);
  CHECK(rep.flow_gap_re(0) > 0.0);
  CHECK(rep.voltage_gap(0) == 0.0);  // slack bus: v_lin = v = v0
  CHECK(rep.voltage_gap(1) > 0.0);
  // Reverse flow: S_hat = -(S - z l) and its linear bound -S_lin, with
  // S_hat <= -S_lin componentwise, i.e. the reverse gaps are >= 0 too.
  CHECK(rep.reverse_flow_gap_re(0) >= -1e-12);
  CHECK(rep.reverse_flow_gap_im(0) >= -1e-12);
}

TEST_CASE("bound lemmas hold across random radial cases") {
  Rng rng(131);
  for (int trial = 0; trial < 15; ++trial) {
    const int nb = rng.uniform_int(3, 14);
    Network net = random_tree(rng, nb);
    DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
    TreeIndex tree = spanning_tree(dnet);
    CVec s = fixed_injections(net);
    BranchFlowState x = solve_radial(net, s);
    LinearState lin = solve_linear_distflow(net, s);
    BoundReport rep = check_bounds(dnet, x, lin, tree);
    CHECK(rep.ok());
    CHECK(rep.max_identity_residual() < 1e-10);
  }
}

TEST_CASE("bounds stay valid for relaxed (inflated-l) points") {
  // The lemma only needs l >= 0 and the balance/drop equalities, so a
  // point with strict cone slack must still satisfy every bound.
  Network net = load_case("feeder5.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  TreeIndex tree = spanning_tree(dnet);
  CVec s = fixed_injections(net);
  BranchFlowState x = solve_radial(net, s);

  // Inflate l on edge 1 and repair balance and drops downstream: the result
  // satisfies the linear families with l >= |S|^2/v (strict slack).
  const int e = 1;
  const double delta = 0.005;
  const Complex zl = dnet.edges[e].z * delta;
  BranchFlowState relaxed = x;
  relaxed.ell(e) += delta;
  relaxed.s(dnet.edges[e].to) += zl;
  for (int j : tree.subtree_nodes[dnet.edges[e].to])
    relaxed.v(j) += std::norm(dnet.edges[e].z) * delta;
  DistflowResiduals r = distflow_residual(dnet, relaxed);
  CHECK(r.balance.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.drop.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.quad(e) > 0.0);

  LinearState lin = solve_linear_distflow(net, relaxed.s);
  BoundReport rep = check_bounds(dnet, relaxed, lin, tree);
  CHECK(rep.ok());
  CHECK(rep.max_identity_residual() < 1e-12);
}

TEST_CASE("near-lossless line makes every bound tight") {
  Network net = load_case("two_bus.json");
  net.lines[0].z = Complex(1e-9, 1e-9);
  net.lines[0].y = 1.0 / net.lines[0].z;
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  TreeIndex tree = spanning_tree(dnet);
  CVec s = two_bus_injections();
  BranchFlowState x = solve_radial(net, s);
  LinearState lin = solve_linear_distflow(net, s);
  BoundReport rep = check_bounds(dnet, x, lin, tree);
  CHECK(rep.ok());
  CHECK(rep.flow_gap_re(0) < 1e-10);
  CHECK(rep.flow_gap_im(0) < 1e-10);
  CHECK(rep.voltage_gap.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("check_bounds requires a radial away orientation") {
  Network mesh = load_case("three_ring.json");
  DirectedNetwork dnet = orient(mesh, OrientMode::as_listed);
  TreeIndex tree = spanning_tree(dnet);
  BranchFlowState x{CVec::Zero(3), RVec::Zero(3), RVec::Constant(3, 1.0),
                    CVec::Zero(3)};
  LinearState lin{CVec::Zero(3), RVec::Constant(3, 1.0)};
  CHECK_THROWS_AS(check_bounds(dnet, x, lin, tree), DomainError);
}
