#include <benchmark/benchmark.h>

#include "dpgmg/multigrid.hpp"

using namespace dpgmg;

namespace {

// Element matrices of one Stokes cell; arg = k.
void BM_LocalSystemStokes(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const ProblemSpec p = stokes_problem();
  const Mesh m = Mesh::uniform(2, {2, 2}, p.domain, k);
  for (auto _ : state) benchmark::DoNotOptimize(local_system(m, 0, p, 2));
}
BENCHMARK(BM_LocalSystemStokes)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

// Condensed global system on a uniform mesh; args = width, k.
void BM_AssembleStokes(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const ProblemSpec p = stokes_problem();
  const Mesh m = Mesh::uniform(2, {w, w}, p.domain, k);
  for (auto _ : state) benchmark::DoNotOptimize(Discretization(m, p, 2).size());
}
BENCHMARK(BM_AssembleStokes)->Args({8, 1})->Args({8, 2})->Args({16, 2})->Unit(benchmark::kMillisecond);

// Assembly of a Navier-Stokes linearization (no kernel sharing).
void BM_AssembleKovasznayLinearized(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const ProblemSpec kv = kovasznay_problem(40.0);
  auto ex = kv.exact;
  const ProblemSpec lin = linearize(kv, [ex](int f, const EvalPoint& x) { return ex(f, x.x); });
  const Mesh m = Mesh::uniform(2, {w, w}, kv.domain, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Discretization(m, lin, 2).size());
}
BENCHMARK(BM_AssembleKovasznayLinearized)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

struct MultilevelFixture {
  ProblemSpec p = stokes_problem();
  Mesh fine;
  Discretization d;
  VCycle v;

  MultilevelFixture(int w, int k)
      : fine(Mesh::uniform(2, {2, 2}, p.domain, k).refine_uniform(ilog2(w / 2))),
        d(fine, p, 2),
        v(d, build_hierarchy(fine, 1, true), LevelOptions{}) {}

  static int ilog2(int n) {
    int r = 0;
    while (n > 1) n >>= 1, ++r;
    return r;
  }
};

// One V-cycle application; args = width, k.
void BM_VCycleApply(benchmark::State& state) {
  MultilevelFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const Eigen::VectorXd r = Eigen::VectorXd::Ones(f.d.size());
  Eigen::VectorXd z;
  for (auto _ : state) {
    f.v.apply(r, z);
    benchmark::DoNotOptimize(z.data());
  }
  state.counters["dofs"] = f.d.size();
}
BENCHMARK(BM_VCycleApply)->Args({8, 2})->Args({16, 2})->Args({8, 4})->Unit(benchmark::kMillisecond);

// Full multigrid-preconditioned CG solve to 1e-10.
void BM_PcgMultilevel(benchmark::State& state) {
  MultilevelFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  int iterations = 0;
  for (auto _ : state) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(f.d.size());
    iterations = pcg(as_operator(f.d.matrix()), f.d.rhs(), f.v.as_operator(), 1e-10, x).iterations;
  }
  state.counters["iterations"] = iterations;
  state.counters["dofs"] = f.d.size();
}
BENCHMARK(BM_PcgMultilevel)->Args({8, 2})->Args({16, 2})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
