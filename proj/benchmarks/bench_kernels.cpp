#include <benchmark/benchmark.h>

#include <random>

#include "dsq/engine.hpp"
#include "dsq/formats.hpp"
#include "dsq/model.hpp"

namespace {

dsq::Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  dsq::Tensor t({r, c});
  for (auto& v : t.data()) v = d(rng);
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, n, 1), b = random_tensor(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dsq::gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

void BM_QuantizeBfp(benchmark::State& state) {
  const auto t = random_tensor(512, 64, 3);
  const auto fmt = dsq::NumberFormat::bfp(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dsq::quantize_tensor(t, fmt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}
BENCHMARK(BM_QuantizeBfp)->Arg(4)->Arg(16);

void BM_QuantizeBfpColumns(benchmark::State& state) {
  const auto t = random_tensor(512, 64, 4);
  const auto fmt = dsq::NumberFormat::bfp(4);
  for (auto _ : state) benchmark::DoNotOptimize(dsq::quantize_tensor(t, fmt, dsq::BoxAxis::Columns));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}
BENCHMARK(BM_QuantizeBfpColumns);

void BM_QuantizeFixed(benchmark::State& state) {
  const auto t = random_tensor(512, 64, 5);
  const auto fmt = dsq::NumberFormat::fixed(16);
  for (auto _ : state) benchmark::DoNotOptimize(dsq::quantize_tensor(t, fmt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}
BENCHMARK(BM_QuantizeFixed);

void BM_ToyTrainingStep(benchmark::State& state) {
  const auto spec = dsq::ModelSpec::toy();
  const auto w = dsq::ModelWeights::init(spec, 1);
  dsq::Batch batch;
  batch.batch_size = spec.batch_size;
  batch.seq_len = spec.seq_len;
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> tok(0, spec.vocab - 1);
  for (int i = 0; i < spec.batch_size * spec.seq_len; ++i) batch.tokens.push_back(tok(rng));
  batch.targets = batch.tokens;
  const auto cfg = state.range(0) ? dsq::PrecisionConfig::of(dsq::FormatKind::Bfp, 16, 4, 4, 16)
                                  : dsq::PrecisionConfig::reference();
  for (auto _ : state) {
    dsq::StashBuffer stash;
    dsq::QuantContext ctx{cfg, nullptr, &stash, nullptr, nullptr};
    benchmark::DoNotOptimize(dsq::forward_backward(spec, w, batch, ctx, {}));
  }
}
BENCHMARK(BM_ToyTrainingStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
