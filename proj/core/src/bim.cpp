#include "opfr/bim.hpp"

#include <cmath>

namespace opfr {

VoltageProfile::VoltageProfile(CVec v) : v_(std::move(v)) {
  if (v_.size() < 1) throw DomainError("voltage profile is empty");
  if (v_(0) != Complex(1.0, 0.0))
    throw DomainError("slack voltage must be exactly 1 angle 0");
}

AdmittanceOperators admittance_operators(const Network& net) {
  const int nb = net.n_bus();
  AdmittanceOperators ops;
  ops.Y = CMat::Zero(nb, nb);
  for (const Line& l : net.lines) {
    ops.Y(l.from, l.from) += l.y;
    ops.Y(l.to, l.to) += l.y;
    ops.Y(l.from, l.to) -= l.y;
    ops.Y(l.to, l.from) -= l.y;
  }
  ops.Y_j.reserve(nb);
  ops.Phi.reserve(nb);
  ops.Psi.reserve(nb);
  ops.J.reserve(nb);
  const Complex two_i(0.0, 2.0);
  for (int j = 0; j < nb; ++j) {
    CMat Yj = CMat::Zero(nb, nb);
    Yj.row(j) = ops.Y.row(j);
    ops.Y_j.push_back(Yj);
    ops.Phi.push_back((Yj.adjoint() + Yj) / 2.0);
    ops.Psi.push_back((Yj.adjoint() - Yj) / two_i);
    CMat Jj = CMat::Zero(nb, nb);
    Jj(j, j) = Complex(1.0, 0.0);
    ops.J.push_back(Jj);
  }
  return ops;
}

CVec injections_from_voltage(const Network& net, const VoltageProfile& V) {
  const CVec& v = V.values();
  CVec s = CVec::Zero(net.n_bus());
  for (const Line& l : net.lines) {
    const Complex yc = std::conj(l.y);
    s(l.from) += yc * v(l.from) * (std::conj(v(l.from)) - std::conj(v(l.to)));
    s(l.to) += yc * v(l.to) * (std::conj(v(l.to)) - std::conj(v(l.from)));
  }
  return s;
}

CVec bim_residual(const Network& net, const VoltageProfile& V, const CVec& s) {
  if (s.size() != net.n_bus())
    throw DomainError("injection vector size does not match the network");
  return s - injections_from_voltage(net, V);
}

CMat cost_matrix(const Network& net, const CostSpec& cost) {
  const int nb = net.n_bus();
  switch (cost.kind) {
    case CostSpec::Kind::total_loss: {
      // sum_j Phi_j = (Y^H + Y)/2 since the Y_j stack back into Y.
      AdmittanceOperators ops = admittance_operators(net);
      return (ops.Y.adjoint() + ops.Y) / 2.0;
    }
    case CostSpec::Kind::weighted_generation: {
      if (cost.weights.size() != nb)
        throw DomainError("generation weights must have one entry per bus");
      if (!cost.weights.allFinite())
        throw DomainError("generation weights must be finite");
      AdmittanceOperators ops = admittance_operators(net);
      CMat C = CMat::Zero(nb, nb);
      for (int j = 0; j < nb; ++j) C += cost.weights(j) * ops.Phi[j];
      return C;
    }
    case CostSpec::Kind::quadratic_voltage: {
      const CMat& C = cost.C;
      if (C.rows() != nb || C.cols() != nb)
        throw DomainError("quadratic-voltage matrix has the wrong size");
      if ((C - C.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw DomainError("quadratic-voltage matrix must be Hermitian");
      for (int j = 0; j < nb; ++j)
        for (int k = j + 1; k < nb; ++k)
          if (std::abs(C(j, k)) > 0 && net.line_between(j, k) < 0)
            throw DomainError(
                "quadratic-voltage matrix has support off the network graph");
      return C;
    }
  }
  throw DomainError("unknown cost variant");
}

Qcqp build_qcqp(const Network& net, const CostSpec& cost) {
  Qcqp q;
  q.C = cost_matrix(net, cost);
  AdmittanceOperators ops = admittance_operators(net);
  auto add = [&q](CMat M, double bound, int bus, const char* kind) {
    if (!std::isfinite(bound)) return;
    q.constraints.push_back({std::move(M), bound, bus, kind});
  };
  for (int j = 0; j < net.n_bus(); ++j) {
    const Bus& b = net.buses[j];
    add(ops.Phi[j], b.s_max.real(), j, "re_s_max");
    add(-ops.Phi[j], -b.s_min.real(), j, "re_s_min");
    add(ops.Psi[j], b.s_max.imag(), j, "im_s_max");
    add(-ops.Psi[j], -b.s_min.imag(), j, "im_s_min");
    add(ops.J[j], b.v_max, j, "v_max");
    add(-ops.J[j], -b.v_min, j, "v_min");
  }
  return q;
}

}  // namespace opfr
