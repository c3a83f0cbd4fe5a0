#include "opfr/generate.hpp"

#include <algorithm>
#include <cmath>

namespace opfr {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

namespace {

Complex random_impedance(Rng& rng) {
  return {rng.uniform(0.003, 0.015), rng.uniform(0.006, 0.030)};
}

Bus slack_bus() {
  Bus b;
  b.id = 0;
  b.s_min = {-10.0, -10.0};
  b.s_max = {10.0, 10.0};
  b.v_min = b.v_max = 1.0;
  return b;
}

Bus load_bus(Rng& rng, int id, double base) {
  Bus b;
  b.id = id;
  Complex load{-rng.uniform(0.3, 1.0) * base, -rng.uniform(0.1, 0.6) * base};
  b.s_min = b.s_max = load;
  b.v_min = 0.81;
  b.v_max = 1.21;
  return b;
}

}  // namespace

Network random_tree(Rng& rng, int n_bus, double load_scale) {
  if (n_bus < 2) throw DomainError("random_tree needs at least 2 buses");
  Network net;
  net.v0 = 1.0;
  net.buses.push_back(slack_bus());
  // Total load stays near 0.4 * load_scale p.u. so the sweep has a
  // comfortable high-voltage solution for any n.
  const double base = load_scale * 0.4 / (n_bus - 1);
  for (int k = 1; k < n_bus; ++k) {
    net.buses.push_back(load_bus(rng, k, base));
    Line l;
    l.from = rng.uniform_int(0, k - 1);
    l.to = k;
    l.z = random_impedance(rng);
    l.y = Complex(1, 0) / l.z;
    net.lines.push_back(l);
  }
  net.validate();
  return net;
}

Network random_connected(Rng& rng, int n_bus, int extra_edges) {
  Network net = random_tree(rng, n_bus, 1.0);
  std::vector<std::pair<int, int>> candidates;
  for (int j = 0; j < n_bus; ++j)
    for (int k = j + 1; k < n_bus; ++k)
      if (net.line_between(j, k) < 0) candidates.emplace_back(j, k);
  const int want = std::min<int>(extra_edges, static_cast<int>(candidates.size()));
  for (int i = 0; i < want; ++i) {
    const int pick = rng.uniform_int(0, static_cast<int>(candidates.size()) - 1);
    auto [j, k] = candidates[pick];
    candidates.erase(candidates.begin() + pick);
    Line l;
    l.from = j;
    l.to = k;
    l.z = random_impedance(rng);
    l.y = Complex(1, 0) / l.z;
    net.lines.push_back(l);
  }
  net.validate();
  return net;
}

CVec random_voltage(Rng& rng, int n_bus, double mag_spread,
                    double angle_spread) {
  CVec v(n_bus);
  v(0) = Complex(1.0, 0.0);
  for (int j = 1; j < n_bus; ++j) {
    const double mag = rng.uniform(1.0 - mag_spread, 1.0 + mag_spread);
    const double ang = rng.uniform(-angle_spread, angle_spread);
    v(j) = std::polar(mag, ang);
  }
  return v;
}

}  // namespace opfr
