#include <benchmark/benchmark.h>

#include "catlab/audit.hpp"
#include "catlab/constructions.hpp"
#include "catlab/lcat.hpp"

namespace {

catlab::LcatConfig phase_cfg() {
  catlab::LcatConfig c;
  c.L = 1L << 20;
  c.B = 64;
  c.d = 128;
  return c;
}

void BM_SuccessCountsSerial(benchmark::State& st) {
  const auto c = phase_cfg();
  for (auto _ : st) benchmark::DoNotOptimize(catlab::success_counts_serial(c, st.range(0), 1));
}
void BM_SuccessCountsParallel(benchmark::State& st) {
  const auto c = phase_cfg();
  for (auto _ : st) benchmark::DoNotOptimize(catlab::success_counts(c, st.range(0), 1));
}
BENCHMARK(BM_SuccessCountsSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuccessCountsParallel)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SuccessCountsFullSerial(benchmark::State& st) {
  auto c = phase_cfg();
  c.L = 4096;
  c.mode = catlab::SimMode::Full;
  for (auto _ : st) benchmark::DoNotOptimize(catlab::success_counts_serial(c, st.range(0), 1));
}
void BM_SuccessCountsFullParallel(benchmark::State& st) {
  auto c = phase_cfg();
  c.L = 4096;
  c.mode = catlab::SimMode::Full;
  for (auto _ : st) benchmark::DoNotOptimize(catlab::success_counts(c, st.range(0), 1));
}
BENCHMARK(BM_SuccessCountsFullSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuccessCountsFullParallel)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_MeasureEpsilonSerial(benchmark::State& st) {
  const auto vocab = catlab::Vocab::orthonormal(64, 64);
  const auto m = catlab::build_audit_model(catlab::Filter::delay(-1), 64, catlab::AttnMode::hard());
  for (auto _ : st) benchmark::DoNotOptimize(catlab::measure_epsilon_serial(m, vocab, 512, 200, false, 1));
}
void BM_MeasureEpsilonParallel(benchmark::State& st) {
  const auto vocab = catlab::Vocab::orthonormal(64, 64);
  const auto m = catlab::build_audit_model(catlab::Filter::delay(-1), 64, catlab::AttnMode::hard());
  for (auto _ : st) benchmark::DoNotOptimize(catlab::measure_epsilon(m, vocab, 512, 200, false, 1));
}
BENCHMARK(BM_MeasureEpsilonSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeasureEpsilonParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
