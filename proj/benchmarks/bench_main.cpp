#include <benchmark/benchmark.h>

#include <algorithm>

#include "offtd/contraction.hpp"
#include "offtd/error.hpp"
#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/td.hpp"

namespace {

using namespace offtd;

struct Instance {
  TabularMdp mdp;
  Policy behavior;
  RatioPair ratios;
  StationaryInfo info;

  Instance(int S, int A) : behavior(uniform_policy(S, A)) {
    for (std::uint64_t seed = 1;; ++seed) {
      mdp = garnet(S, A, std::min(S, 3), seed);
      try {
        info = stationary(mdp, behavior);
        break;
      } catch (const Error&) {
      }
    }
    ratios = preset(PresetKind::kRetrace, {}, mdp, random_policy(S, A, 99), behavior);
  }
};

void BM_BuildMatrices(benchmark::State& state) {
  const Instance in(static_cast<int>(state.range(0)), 4);
  const int n = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto m = build_matrices(in.mdp, in.behavior, in.ratios, n, in.info);
    benchmark::DoNotOptimize(m.A.data());
  }
}
BENCHMARK(BM_BuildMatrices)->Args({10, 1})->Args({10, 4})->Args({50, 4})->Args({100, 8});

void BM_RunLearner(benchmark::State& state) {
  const Instance in(20, 4);
  LearnerConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  cfg.step_size = 1e-3;
  cfg.num_iterations = 100000;
  cfg.ratios = in.ratios;
  const QTable ref = QTable::Zero(in.mdp.sa_count());
  for (auto _ : state) {
    auto r = run_learner(in.mdp, in.behavior, cfg, ref, cfg.num_iterations);
    benchmark::DoNotOptimize(r.final_q.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.num_iterations);
}
BENCHMARK(BM_RunLearner)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_VerifyContraction(benchmark::State& state) {
  const Instance in(static_cast<int>(state.range(0)), 4);
  const auto m = build_matrices(in.mdp, in.behavior, in.ratios, 3, in.info);
  const auto cert = build_weights(m.A, omega_formula(m), 0.5);
  for (auto _ : state) {
    auto r = verify_contraction(m.A, cert, {1.0, 2.0, 4.0}, 1000, 1);
    benchmark::DoNotOptimize(r.passed);
  }
}
BENCHMARK(BM_VerifyContraction)->Arg(6)->Arg(25)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
