#include <benchmark/benchmark.h>

#include "anmd/hw.hpp"
#include "anmd/rng.hpp"

using namespace anmd;

namespace {

FxTensor random_fx(Shape4 s, std::uint64_t seed, const QFormat& q) {
  FxTensor t;
  t.shape = s;
  t.q = q;
  t.data.resize(static_cast<std::size_t>(s.elems()));
  RngStream rng(seed);
  for (auto& v : t.data) v = static_cast<std::int16_t>(rng.next_u64() & 0x3FF) - 512;
  return t;
}

void bench_lfsr_chain(benchmark::State& state) {
  const BoxMullerLut lut = BoxMullerLut::make(10);
  const QFormat q{8};
  Lfsr u1(0xACE1), u2(0x1234);
  std::int64_t acc = 0;
  for (auto _ : state) {
    const std::int16_t z = unc_z1(u1.next_uniform(), u2.next_uniform(), lut, q);
    acc += z;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(bench_lfsr_chain);

void bench_noise_cancel(benchmark::State& state) {
  const QFormat q{8};
  const Shape4 s{1, 32, 16, 16};
  const FxTensor x = random_fx(s, 1, q);
  const FxTensor mu = random_fx(s, 2, q);
  const FxTensor sigma = random_fx(s, 3, q);
  const BoxMullerLut lut = BoxMullerLut::make(10);
  HwConfig cfg;
  for (auto _ : state) {
    LfsrBank bank = LfsrBank::from_master_seed(cfg.num_cancel_lanes, 99);
    auto [out, cycles] = noise_cancel(x, mu, sigma, cfg, bank, lut);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.counters["elems/s"] = benchmark::Counter(
      static_cast<double>(s.elems()), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(bench_noise_cancel);

void bench_fx_conv(benchmark::State& state) {
  const QFormat q{8};
  const FxTensor x = random_fx(Shape4{1, 64, 16, 16}, 1, q);
  const FxTensor w = random_fx(Shape4{16, 64, 1, 1}, 2, q);
  const FxTensor b = random_fx(Shape4{16, 1, 1, 1}, 3, q);
  for (auto _ : state) {
    FxTensor y = fx_conv(x, w, &b, LayerKind::PointwiseConv2d, 1, 0);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(bench_fx_conv);

}  // namespace
