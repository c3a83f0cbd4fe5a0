#pragma once

#include <string>
#include <vector>

#include "opfr/cost.hpp"
#include "opfr/netmodel.hpp"

/// Bus injection model: admittance operators, power-flow residuals,
/// injections from voltages, and the QCQP standard form.
namespace opfr {

/// Complex bus voltages indexed by {0,...,n} with the slack pinned:
/// V_0 = 1 angle 0 exactly (checked on construction).  All comparisons in
/// the library are absolute, never up-to-global-phase.
class VoltageProfile {
 public:
  explicit VoltageProfile(CVec v);

  const CVec& values() const { return v_; }
  Complex operator[](int j) const { return v_(j); }
  int n_bus() const { return static_cast<int>(v_.size()); }

 private:
  CVec v_;
};

/// The admittance matrix Y and the per-bus operator family: Y_j picks out
/// row j of Y, Phi_j / Psi_j are its Hermitian and skew-Hermitian parts so
/// that V^H Phi_j V = Re(s_j) and V^H Psi_j V = Im(s_j), and J_j selects
/// |V_j|^2.
struct AdmittanceOperators {
  CMat Y;                   ///< (n+1)x(n+1), symmetric
  std::vector<CMat> Y_j;    ///< e_j e_j^H Y
  std::vector<CMat> Phi;    ///< (Y_j^H + Y_j)/2, Hermitian
  std::vector<CMat> Psi;    ///< (Y_j^H - Y_j)/(2i), Hermitian
  std::vector<CMat> J;      ///< e_j e_j^H
};

/// One QCQP row: V^H M V <= bound with M Hermitian.  `bus` and `kind`
/// ("re_s_max", "re_s_min", "im_s_max", "im_s_min", "v_max", "v_min")
/// identify where the row came from.
struct QcqpConstraint {
  CMat M;
  double bound = 0.0;
  int bus = 0;
  std::string kind;
};

/// Standard-form QCQP: minimize V^H C V subject to the listed rows.
/// Rows for infinite bounds are omitted.
struct Qcqp {
  CMat C;
  std::vector<QcqpConstraint> constraints;
};

/// Build Y and the per-bus operator family for a network.
AdmittanceOperators admittance_operators(const Network& net);

/// Injections implied by a voltage profile:
/// s_j = sum_{k: j~k} conj(y_jk) V_j (conj(V_j) - conj(V_k)).
CVec injections_from_voltage(const Network& net, const VoltageProfile& V);

/// Per-bus complex residual s_j - s_j(V); zero iff V solves the power-flow
/// equations for s.
CVec bim_residual(const Network& net, const VoltageProfile& V, const CVec& s);

/// QCQP standard form of the OPF over voltages: objective from `cost`, six
/// inequality rows per bus (+-Phi_j, +-Psi_j, +-J_j) for the finite bounds.
Qcqp build_qcqp(const Network& net, const CostSpec& cost);

/// The objective matrix alone (also used by the partial-matrix standard
/// form).  Throws DomainError for quadratic_voltage matrices that are not
/// Hermitian, have the wrong size, or have support off the network's edges.
CMat cost_matrix(const Network& net, const CostSpec& cost);

}  // namespace opfr
