#include <benchmark/benchmark.h>

#include <random>

#include "mks/config.hpp"
#include "mks/response.hpp"

using namespace mks;

namespace {

RunConfig config(const char* name) { return load_config(std::string(MKS_CONFIG_DIR) + "/" + name + ".cfg"); }

Eigen::MatrixXcd random_block(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd a(rows, cols);
  for (auto& x : a.reshaped()) x = cplx(normal(rng), normal(rng));
  return a;
}

/// Range argument: 1 for si1d, 3 for tiny3d.
RunConfig benchmark_config(std::int64_t dimension) { return config(dimension == 1 ? "si1d" : "tiny3d"); }

void BM_apply_h(benchmark::State& state) {
  const RunConfig c = benchmark_config(state.range(0));
  const BasisPtr b = build_basis(c.cell, static_cast<double>(state.range(1)));
  const Hamiltonian h = build_hamiltonian(c.model, b, GridFunction::constant(b, c.model.electrons / c.cell.volume()));
  const Eigen::MatrixXcd block = random_block(b->size(), 8);
  for (auto _ : state) benchmark::DoNotOptimize(h.apply(block));
  state.counters["basis"] = static_cast<double>(b->size());
}
BENCHMARK(BM_apply_h)->Args({1, 80})->Args({1, 320})->Args({3, 6})->Args({3, 10});

void BM_lobpcg(benchmark::State& state) {
  const RunConfig c = benchmark_config(state.range(0));
  const BasisPtr b = build_basis(c.cell, static_cast<double>(state.range(1)));
  const Hamiltonian h = build_hamiltonian(c.model, b, GridFunction::constant(b, c.model.electrons / c.cell.volume()));
  EigenOptions o;
  o.method = EigenMethod::lobpcg;
  for (auto _ : state) benchmark::DoNotOptimize(lowest_eigenpairs(h, 8, o));
  state.counters["basis"] = static_cast<double>(b->size());
}
BENCHMARK(BM_lobpcg)->Args({1, 80})->Args({3, 10})->Unit(benchmark::kMillisecond);

void BM_scf(benchmark::State& state) {
  const RunConfig c = benchmark_config(state.range(0));
  const BasisPtr b = build_basis(c.cell, c.cutoff);
  for (auto _ : state) benchmark::DoNotOptimize(run_scf(c.model, b, c.scf));
  state.counters["basis"] = static_cast<double>(b->size());
}
BENCHMARK(BM_scf)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_apply_chi(benchmark::State& state) {
  const RunConfig c = benchmark_config(state.range(0));
  const ScfState s = run_scf(c.model, build_basis(c.cell, c.cutoff), c.scf);
  const ResponseContext ctx(c.model, s, c.scf);
  const Eigen::MatrixXcd a = random_block(ctx.dim(), ctx.dim());
  const Eigen::MatrixXcd psi = 0.5 * (a + a.adjoint());
  for (auto _ : state) benchmark::DoNotOptimize(apply_chi(ctx, psi));
  state.counters["tangent_dim"] = static_cast<double>(ctx.dim());
}
BENCHMARK(BM_apply_chi)->Arg(1)->Arg(3);

}  // namespace

BENCHMARK_MAIN();
