#pragma once

#include <cstdint>

#include "opfr/netmodel.hpp"

namespace opfr {

/// Deterministic random generator (xoshiro256++ seeded via splitmix64).
/// Hand-rolled rather than <random> distributions because the standard
/// distributions are implementation-defined: the same seed must produce the
/// same instances on every platform for reproducible reports.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

 private:
  std::uint64_t s_[4];
};

/// Random radial network with loads only: every non-slack bus has a fixed
/// negative-real-part injection (scaled so the feeder stays comfortably in
/// the high-voltage regime), bus 0 has a wide finite generation window.
Network random_tree(Rng& rng, int n_bus, double load_scale = 1.0);

/// Random connected network: a random tree plus `extra_edges` distinct
/// chords (capped at the number of available non-edges).
Network random_connected(Rng& rng, int n_bus, int extra_edges);

/// Random voltage profile near 1 angle 0: V_0 = 1 exactly, magnitudes in
/// [1 - mag_spread, 1 + mag_spread], angles in +-angle_spread radians.
CVec random_voltage(Rng& rng, int n_bus, double mag_spread = 0.05,
                    double angle_spread = 0.3);

}  // namespace opfr
