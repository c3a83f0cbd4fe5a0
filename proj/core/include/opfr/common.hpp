#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

/// Shared scalar/vector aliases and the error hierarchy used across the
/// library.  All quantities are in per-unit; angles are radians.
namespace opfr {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed case-file text (syntax level).  `byte_offset` points at the
/// offending position when the underlying JSON parser reports one, else -1.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long byte_offset = -1)
      : Error(msg), byte_offset_(byte_offset) {}
  long byte_offset() const { return byte_offset_; }

 private:
  long byte_offset_;
};

/// Structurally valid case text that violates a model invariant
/// (disconnected graph, duplicate line, nonpositive voltage bound, ...).
class CaseError : public Error {
 public:
  using Error::Error;
};

/// An operation was applied outside its domain: non-radial network where a
/// tree is required, degenerate edge with undefined angle, state that does
/// not satisfy the equations it is claimed to satisfy, and so on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve exceeded its budget; carries the last residual seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double last_residual, int iterations)
      : Error(msg), last_residual_(last_residual), iterations_(iterations) {}
  double last_residual() const { return last_residual_; }
  int iterations() const { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// Feasible-solution recovery refused: the input is not in the set the
/// recovery map is defined on.  The message names the offending edge or
/// cycle; callers that need the structured data use the reports returned by
/// the checking operations instead of this exception.
class RecoveryError : public Error {
 public:
  using Error::Error;
};

/// Wrap an angle to the half-open interval (-pi, pi].  Values landing
/// exactly on -pi are mapped to +pi; the tie is measure-zero but the choice
/// is pinned so angle recovery is reproducible.
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);  // in [-pi, pi]
  if (w <= -kPi) w = kPi;
  return w;
}

/// True when both real and imaginary parts of `a` are <= those of `b`
/// (componentwise complex inequality).
inline bool complex_leq(Complex a, Complex b) {
  return a.real() <= b.real() && a.imag() <= b.imag();
}

}  // namespace opfr
