// Serial reference vs OpenMP scan over the default 161-point |alpha|^2 grid,
// plus the dense density-matrix oracle for scale.

#include <benchmark/benchmark.h>

#include "qsd/optimizer.hpp"

namespace {

qsd::optimizer::ScanSpec spec_for(double hi) {
  qsd::optimizer::ScanSpec spec;
  spec.hi = hi;
  spec.target = qsd::pipeline::TargetQubit::from_ratio(1.0);
  spec.base.set_eta(0.5);
  return spec;
}

void BM_ScanSerial(benchmark::State& state) {
  const auto spec = spec_for(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(qsd::optimizer::scan_serial(spec));
}

void BM_ScanParallel(benchmark::State& state) {
  const auto spec = spec_for(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(qsd::optimizer::scan(spec));
}

void BM_RunDense(benchmark::State& state) {
  qsd::pipeline::SchemeConfig cfg;
  cfg.alpha = 0.5;
  cfg.set_eta(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(qsd::pipeline::run_dense(cfg));
}

void BM_RunBranches(benchmark::State& state) {
  qsd::pipeline::SchemeConfig cfg;
  cfg.alpha = 0.5;
  cfg.set_eta(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(qsd::pipeline::run_branches(cfg));
}

}  // namespace

BENCHMARK(BM_ScanSerial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanParallel)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RunDense)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunBranches)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
