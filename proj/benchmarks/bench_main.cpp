#include <benchmark/benchmark.h>

#include "madgan/autodiff.hpp"
#include "madgan/config.hpp"
#include "madgan/gmm.hpp"
#include "madgan/metrics.hpp"
#include "madgan/rng.hpp"
#include "madgan/runtime.hpp"
#include "madgan/trainer.hpp"

namespace {

using namespace madgan;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& st) {
  const auto rows = static_cast<std::size_t>(st.range(0));
  const Tensor x = random_matrix(rows, 128, 1);
  const ad::Parameter w("w", random_matrix(128, 128, 2));
  for (auto _ : st) {
    ad::Tape tape;
    auto loss = ad::sum(ad::matmul(tape.leaf(x), tape.param(w)));
    benchmark::DoNotOptimize(tape.backward(loss));
  }
  st.counters["GFLOP/s"] = benchmark::Counter(6.0 * static_cast<double>(rows) * 128 * 128,
                                               benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(128)->Arg(640);

void BM_TrainStep(benchmark::State& st) {
  auto cfg = config::preset("table1-madgan");
  cfg.variant = static_cast<config::Variant>(st.range(0));
  cfg.dataset_size = 10000;
  train::TrainState state(cfg);
  for (auto _ : st) benchmark::DoNotOptimize(train::train_step(state));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Histogram(benchmark::State& st) {
  const auto set = data::sample(data::GmmSpec::five_mode_preset(), static_cast<std::size_t>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(metrics::build_histogram(set.values, -10.0, 125.0, 0.1));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * st.range(0));
}
BENCHMARK(BM_Histogram)->Arg(65536)->Arg(1 << 20);

void BM_Sample(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(data::sample(data::GmmSpec::five_mode_preset(), 65536, 5));
}
BENCHMARK(BM_Sample);

}  // namespace

int main(int argc, char** argv) {
  madgan::configure_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
