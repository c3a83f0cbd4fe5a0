#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "opfr/netmodel.hpp"

/// Test-side helpers: case loading and solver-independent oracles.  The
/// oracle computations are deliberately written from scratch here (direct
/// fixed-point iteration on the scalar 2-bus recursion) so library results
/// are checked against an implementation that shares no code with them.
namespace testutil {

inline std::string case_path(const std::string& name) {
  return std::string(OPFRELAX_CASE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline opfr::Network load_case(const std::string& name) {
  return opfr::parse_case(read_file(case_path(name)));
}

namespace oracle {

/// High-voltage solution of the single-line network: slack -- z -- load s1.
struct TwoBus {
  double ell;         ///< |I|^2
  double v1;          ///< |V_1|^2
  opfr::Complex S01;  ///< sending-end power (equals the slack injection)
  double loss;        ///< Re(z) * ell
};

/// Scalar fixed point ell <- |(-s1) + z*ell|^2 / v0 with the voltage drop
/// evaluated afterwards.  Converges for any lightly loaded case.
inline TwoBus two_bus(opfr::Complex s1, opfr::Complex z, double v0) {
  double ell = 0.0;
  for (int i = 0; i < 500; ++i) {
    const opfr::Complex S = -s1 + z * ell;
    const double next = std::norm(S) / v0;
    if (std::abs(next - ell) < 1e-18) {
      ell = next;
      break;
    }
    ell = next;
  }
  const opfr::Complex S = -s1 + z * ell;
  const double v1 =
      v0 - 2.0 * (std::conj(z) * S).real() + std::norm(z) * ell;
  return TwoBus{ell, v1, S, z.real() * ell};
}

// Frozen values of the reference case s1 = -0.1-0.05i, z = 0.01+0.02i,
// v0 = 1, cross-checked against a Newton solve of the voltage equation
// (the two agree to 17 significant digits).
inline constexpr double kTwoBusEll = 0.012550279874259499;
inline constexpr double kTwoBusV1 = 0.99599372486006287;
inline constexpr double kTwoBusS01Re = 0.10012550279874259;
inline constexpr double kTwoBusS01Im = 0.05025100559748519;
inline constexpr double kTwoBusLoss = 1.2550279874259499e-4;
inline constexpr double kTwoBusV1Re = 0.99799372486006287;
inline constexpr double kTwoBusV1Im = -0.0015;

}  // namespace oracle

}  // namespace testutil
