#include <benchmark/benchmark.h>

#include "opfr/generate.hpp"
#include "opfr/netmodel.hpp"
#include "opfr/pmatrix.hpp"
#include "opfr/radial.hpp"
#include "opfr/relax.hpp"
#include "opfr/socp.hpp"

namespace {

void BM_SolveRadial(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_tree(rng, n_bus);
  const opfr::CVec s = opfr::fixed_injections(net);
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::solve_radial(net, s));
  }
}
BENCHMARK(BM_SolveRadial)->Arg(10)->Arg(30)->Arg(100);

void BM_SpanningTree(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_connected(rng, n_bus, n_bus / 3);
  const opfr::DirectedNetwork dnet = opfr::orient(net, opfr::OrientMode::as_listed);
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::spanning_tree(dnet));
  }
}
BENCHMARK(BM_SpanningTree)->Arg(10)->Arg(50);

void BM_SocpSolveBfm(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_tree(rng, n_bus);
  const opfr::BfmSocp b = opfr::build_bfm_socp(net, opfr::CostSpec::loss());
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::socp::solve(b.problem, {}));
  }
}
BENCHMARK(BM_SocpSolveBfm)->Arg(5)->Arg(15)->Arg(30);

void BM_SocpSolveBim(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_tree(rng, n_bus);
  const opfr::BimSocp b = opfr::build_bim_socp(net, opfr::CostSpec::loss());
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::socp::solve(b.problem, {}));
  }
}
BENCHMARK(BM_SocpSolveBim)->Arg(5)->Arg(15)->Arg(30);

void BM_ChordalExtension(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_connected(rng, n_bus, n_bus / 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::chordal_extension(net));
  }
}
BENCHMARK(BM_ChordalExtension)->Arg(10)->Arg(50)->Arg(100);

void BM_Rank1Completion(benchmark::State& state) {
  const int n_bus = static_cast<int>(state.range(0));
  opfr::Rng rng(42);
  opfr::Network net = opfr::random_connected(rng, n_bus, n_bus / 3);
  const opfr::VoltageProfile V(opfr::random_voltage(rng, n_bus));
  const opfr::PartialMatrix W = opfr::partial_from_voltage(net, V);
  const opfr::DirectedNetwork dnet =
      opfr::orient(net, opfr::OrientMode::as_listed);
  const opfr::TreeIndex tree = opfr::spanning_tree(dnet);
  for (auto _ : state) {
    benchmark::DoNotOptimize(opfr::rank1_completion(W, tree));
  }
}
BENCHMARK(BM_Rank1Completion)->Arg(10)->Arg(50)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
