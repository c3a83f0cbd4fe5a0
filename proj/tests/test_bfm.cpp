#include <cmath>

#include "doctest.h"
#include "opfr/bfm.hpp"
#include "opfr/generate.hpp"
#include "opfr/radial.hpp"
#include "support.hpp"

using namespace opfr;
using testutil::load_case;
namespace oracle = testutil::oracle;

namespace {

ComplexState zero_state(const DirectedNetwork& dnet) {
  return ComplexState{CVec::Zero(dnet.n_edge()), CVec::Zero(dnet.n_edge()),
                      VoltageProfile(CVec::Constant(dnet.n_bus(), 1.0)),
                      CVec::Zero(dnet.n_bus())};
}

}  // namespace

TEST_CASE("zero-injection state has zero residuals") {
  DirectedNetwork dnet =
      orient(load_case("three_ring.json"), OrientMode::as_listed);
  CHECK(bfm_residual(dnet, zero_state(dnet)).max_abs() == 0.0);
}

TEST_CASE("two-bus oracle through the constructive map") {
  Network net = load_case("two_bus.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  CVec v(2);
  v << Complex(1, 0), Complex(oracle::kTwoBusV1Re, oracle::kTwoBusV1Im);
  ComplexState x = bim_to_bfm(dnet, VoltageProfile(v));

  CHECK(bfm_residual(dnet, x).max_abs() < 1e-10);
  CHECK(std::abs(x.S(0) - Complex(0.100125, 0.050251)) < 1e-5);
  CHECK(std::abs(std::norm(x.I(0)) - 1.2550e-2) < 1e-5);
  CHECK(std::abs(x.S(0) - Complex(oracle::kTwoBusS01Re, oracle::kTwoBusS01Im)) <
        1e-13);
  CHECK(std::abs(std::norm(x.I(0)) - oracle::kTwoBusEll) < 1e-13);
  CHECK(std::abs(x.s(1) - Complex(-0.1, -0.05)) < 1e-8);
}

TEST_CASE("round trip and per-edge loss identity on random meshes") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int nb = rng.uniform_int(2, 10);
    Network net = random_connected(rng, nb, rng.uniform_int(0, 3));
    DirectedNetwork dnet = orient(net, OrientMode::as_listed);
    VoltageProfile V(random_voltage(rng, nb));
    ComplexState x = bim_to_bfm(dnet, V);

    CHECK(bfm_residual(dnet, x).max_abs() < 1e-10);
    // Round trip is the identity bit-for-bit: g^{-1} projects onto V.
    VoltageProfile back = bfm_to_bim(dnet, x);
    CHECK((back.values() - V.values()).cwiseAbs().maxCoeff() == 0.0);

    const CVec& v = V.values();
    for (int e = 0; e < dnet.n_edge(); ++e) {
      const DirectedEdge& de = dnet.edges[e];
      // Sending power minus the line loss telescopes to the receiving end.
      const Complex lhs = x.S(e) - de.z * std::norm(x.I(e));
      const Complex rhs =
          -std::conj(de.y) * v(de.to) * std::conj(v(de.to) - v(de.from));
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("corrupted states are rejected by the inverse map") {
  DirectedNetwork dnet =
      orient(load_case("two_bus.json"), OrientMode::away_from_root);
  CVec v(2);
  v << Complex(1, 0), Complex(oracle::kTwoBusV1Re, oracle::kTwoBusV1Im);
  ComplexState x = bim_to_bfm(dnet, VoltageProfile(v));
  x.S *= 2.0;
  CHECK_THROWS_AS(bfm_to_bim(dnet, x), DomainError);
}

TEST_CASE("flipping a current's sign breaks Ohm on that edge only") {
  DirectedNetwork dnet =
      orient(load_case("feeder5.json"), OrientMode::away_from_root);
  Rng rng(5);
  ComplexState x = bim_to_bfm(dnet, VoltageProfile(random_voltage(rng, 5)));
  x.I(2) = -x.I(2);
  BfmResiduals r = bfm_residual(dnet, x);
  CHECK(std::abs(r.ohm(2)) > 1e-6);
  for (int e = 0; e < dnet.n_edge(); ++e)
    if (e != 2) CHECK(std::abs(r.ohm(e)) < 1e-12);
  // |I|^2 is unchanged, so power balance still holds.
  CHECK(r.balance.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("magnitude relaxation") {
  DirectedNetwork dnet =
      orient(load_case("two_bus.json"), OrientMode::away_from_root);

  SUBCASE("zero state maps to the flat point") {
    BranchFlowState x = relax_magnitudes(dnet, zero_state(dnet));
    CHECK(x.S.cwiseAbs().maxCoeff() == 0.0);
    CHECK(x.ell.maxCoeff() == 0.0);
    CHECK(x.v.minCoeff() == 1.0);
  }
  SUBCASE("the quadratic equality is inherited exactly") {
    Rng rng(13);
    Network mesh = load_case("mesh5.json");
    DirectedNetwork dm = orient(mesh, OrientMode::as_listed);
    ComplexState xc = bim_to_bfm(dm, VoltageProfile(random_voltage(rng, 5)));
    BranchFlowState x = relax_magnitudes(dm, xc);
    for (int e = 0; e < dm.n_edge(); ++e) {
      const double lhs = std::norm(x.S(e));
      const double rhs = x.v(dm.edges[e].from) * x.ell(e);
      CHECK(std::abs(lhs - rhs) <= 1e-14 * std::max(1.0, rhs));
    }
  }
}

TEST_CASE("implied angles") {
  Network net = load_case("two_bus.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  CVec v(2);
  v << Complex(1, 0), Complex(oracle::kTwoBusV1Re, oracle::kTwoBusV1Im);
  ComplexState xc = bim_to_bfm(dnet, VoltageProfile(v));
  BranchFlowState x = relax_magnitudes(dnet, xc);

  SUBCASE("zero flow means zero angles") {
    BranchFlowState flat = relax_magnitudes(dnet, zero_state(dnet));
    CHECK(beta(dnet, flat).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single edge reproduces the true angle drop") {
    const RVec b = beta(dnet, x);
    CHECK(std::abs(b(0) - (-std::arg(v(1)))) < 1e-12);
  }
  SUBCASE("scaling (v, S, l) leaves beta unchanged") {
    BranchFlowState scaled = x;
    scaled.v *= 3.25;
    scaled.S *= 3.25;
    scaled.ell *= 3.25;
    CHECK((beta(dnet, scaled) - beta(dnet, x)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("degenerate edge is a hard error") {
    BranchFlowState bad = x;
    // Force v_j - conj(z) S to exactly zero on the edge.
    bad.S(0) = bad.v(0) / std::conj(dnet.edges[0].z);
    CHECK_THROWS_AS(beta(dnet, bad), DomainError);
  }
}

TEST_CASE("cycle condition on radial networks is vacuous") {
  Network net = load_case("feeder5.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  TreeIndex tree = spanning_tree(dnet);
  Rng rng(17);
  ComplexState xc = bim_to_bfm(dnet, VoltageProfile(random_voltage(rng, 5)));
  AngleRecoveryResult r =
      check_cycle_condition(dnet, relax_magnitudes(dnet, xc), tree);
  CHECK(r.satisfied);
  CHECK(r.defects.size() == 0);
}

TEST_CASE("cycle condition on meshes built from genuine voltages") {
  Rng rng(29);
  for (const char* name : {"three_ring.json", "mesh5.json", "k4.json"}) {
    Network net = load_case(name);
    DirectedNetwork dnet = orient(net, OrientMode::as_listed);
    TreeIndex tree = spanning_tree(dnet);
    VoltageProfile V(random_voltage(rng, net.n_bus()));
    BranchFlowState x = relax_magnitudes(dnet, bim_to_bfm(dnet, V));
    AngleRecoveryResult r = check_cycle_condition(dnet, x, tree);
    CHECK(r.satisfied);
    CHECK(r.max_defect() < 1e-9);
    for (int j = 1; j < net.n_bus(); ++j) {
      const double diff = wrap_angle(r.theta(j - 1) - std::arg(V.values()(j)));
      CHECK(std::abs(diff) < 1e-9);
    }
  }
}

TEST_CASE("a twisted edge produces the expected defect") {
  Network net = load_case("three_ring.json");
  DirectedNetwork dnet = orient(net, OrientMode::as_listed);
  TreeIndex tree = spanning_tree(dnet);
  Rng rng(31);
  VoltageProfile V(random_voltage(rng, 3, 0.02, 0.1));
  BranchFlowState x = relax_magnitudes(dnet, bim_to_bfm(dnet, V));

  // Rewrite S on the chord so its implied angle shifts by exactly 0.3 rad.
  const int chord = tree.non_tree_edges[0];
  const DirectedEdge& de = dnet.edges[chord];
  const Complex w = x.v(de.from) - std::conj(de.z) * x.S(chord);
  const Complex w_twisted = std::polar(std::abs(w), std::arg(w) + 0.3);
  x.S(chord) = (x.v(de.from) - w_twisted) / std::conj(de.z);

  AngleRecoveryResult r = check_cycle_condition(dnet, x, tree);
  CHECK_FALSE(r.satisfied);
  CHECK(std::abs(std::abs(r.defects(0)) - 0.3) < 1e-9);
  CHECK_THROWS_AS(recover_angles(dnet, x, tree), RecoveryError);
}

TEST_CASE("angle recovery round trips") {
  SUBCASE("radial oracle") {
    Network net = load_case("feeder5.json");
    DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
    TreeIndex tree = spanning_tree(dnet);
    Rng rng(41);
    ComplexState xc = bim_to_bfm(dnet, VoltageProfile(random_voltage(rng, 5)));
    ComplexState back = recover_angles(dnet, relax_magnitudes(dnet, xc), tree);
    CHECK((back.V.values() - xc.V.values()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.I - xc.I).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.S - xc.S).cwiseAbs().maxCoeff() == 0.0);
    CHECK(bfm_residual(dnet, back).max_abs() < 1e-10);
  }
  SUBCASE("mesh point from genuine voltages") {
    Network net = load_case("mesh5.json");
    DirectedNetwork dnet = orient(net, OrientMode::as_listed);
    TreeIndex tree = spanning_tree(dnet);
    Rng rng(43);
    ComplexState xc = bim_to_bfm(dnet, VoltageProfile(random_voltage(rng, 5)));
    ComplexState back = recover_angles(dnet, relax_magnitudes(dnet, xc), tree);
    CHECK((back.V.values() - xc.V.values()).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(bfm_residual(dnet, back).max_abs() < 1e-10);
  }
  SUBCASE("zero flow recovers the flat profile") {
    DirectedNetwork dnet =
        orient(load_case("feeder5.json"), OrientMode::away_from_root);
    TreeIndex tree = spanning_tree(dnet);
    BranchFlowState flat = relax_magnitudes(dnet, zero_state(dnet));
    ComplexState back = recover_angles(dnet, flat, tree);
    CHECK((back.V.values() - CVec::Constant(5, 1.0)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(back.I.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("slack cones are refused") {
    Network net = load_case("two_bus.json");
    DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
    TreeIndex tree = spanning_tree(dnet);
    CVec v(2);
    v << Complex(1, 0), Complex(oracle::kTwoBusV1Re, oracle::kTwoBusV1Im);
    BranchFlowState x =
        relax_magnitudes(dnet, bim_to_bfm(dnet, VoltageProfile(v)));
    x.ell(0) = 2.0 * std::norm(x.S(0)) / x.v(0);  // v l = 2 |S|^2
    CHECK_THROWS_AS(recover_angles(dnet, x, tree), RecoveryError);
  }
}

TEST_CASE("orientation reversal") {
  Network net = load_case("feeder5.json");
  DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  DirectedNetwork rnet = reversed(dnet);
  Rng rng(47);
  ComplexState xc = bim_to_bfm(dnet, VoltageProfile(random_voltage(rng, 5)));
  BranchFlowState x = relax_magnitudes(dnet, xc);

  SUBCASE("zero maps to zero") {
    BranchFlowState flat = relax_magnitudes(dnet, zero_state(dnet));
    BranchFlowState rev = reverse_orientation(dnet, flat);
    CHECK(rev.S.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("involution") {
    BranchFlowState twice =
        reverse_orientation(rnet, reverse_orientation(dnet, x));
    CHECK((twice.S - x.S).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((twice.ell - x.ell).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("reversed state satisfies the reversed-network equations") {
    BranchFlowState rev = reverse_orientation(dnet, x);
    CHECK((rev.v - x.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rev.ell - x.ell).cwiseAbs().maxCoeff() == 0.0);
    CHECK(distflow_residual(rnet, rev).max_abs() < 1e-10);
  }
}
