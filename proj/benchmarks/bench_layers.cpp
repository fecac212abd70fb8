#include <benchmark/benchmark.h>

#include "anmd/autodiff.hpp"
#include "anmd/model.hpp"
#include "anmd/rng.hpp"

using namespace anmd;

namespace {

Tensor4 random_tensor(Shape4 s, std::uint64_t seed) {
  Tensor4 t(s);
  RngStream rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(-1.0, 1.0);
  return t;
}

LayerDesc make_conv(int c_in, int c_out, int k, int stride, int padding, std::uint64_t seed) {
  LayerDesc d;
  d.kind = k == 1 ? LayerKind::PointwiseConv2d : LayerKind::Conv2d;
  d.in_channels = c_in;
  d.out_channels = c_out;
  d.kernel = k;
  d.stride = stride;
  d.padding = padding;
  d.weight = random_tensor(Shape4{c_out, c_in, k, k}, seed);
  d.bias = random_tensor(Shape4{c_out, 1, 1, 1}, seed + 1);
  d.trainable = true;
  return d;
}

void bench_conv_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const LayerDesc conv = make_conv(32, 32, 3, 1, 1, 42);
  const Tensor4 x = random_tensor(Shape4{n, 32, 32, 32}, 7);
  for (auto _ : state) {
    Tensor4 y = conv2d(x, conv);
    benchmark::DoNotOptimize(y.data());
  }
  const double macs = 2.0 * n * 32.0 * 32 * 32 * 32 * 9;
  state.counters["GFLOP/s"] =
      benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(bench_conv_forward)->Arg(8)->Arg(64);

void bench_conv_backward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const LayerDesc conv = make_conv(32, 32, 3, 1, 1, 42);
  const Tensor4 x = random_tensor(Shape4{n, 32, 32, 32}, 7);
  const Tensor4 gy = random_tensor(Shape4{n, 32, 32, 32}, 9);
  for (auto _ : state) {
    Tensor4 gx, gw, gb;
    conv2d_backward(x, conv, gy, &gx, &gw, &gb);
    benchmark::DoNotOptimize(gx.data());
  }
  const double macs = 2.0 * 2.0 * n * 32.0 * 32 * 32 * 32 * 9;
  state.counters["GFLOP/s"] =
      benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(bench_conv_backward)->Arg(8)->Arg(64);

void bench_smallcnn_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ModelGraph model = build_small_cnn(3);
  const Tensor4 x = random_tensor(Shape4{n, 3, 32, 32}, 11);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 10;
  for (auto _ : state) {
    ForwardOptions fo;
    fo.record_tape = true;
    ForwardResult fr = forward(model, x, fo);
    LossResult lr = cross_entropy(fr.logits, labels);
    Gradients g = backward(model, fr.tape, lr.grad);
    benchmark::DoNotOptimize(g.weight.data());
  }
  state.counters["samples/s"] = benchmark::Counter(
      static_cast<double>(n), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(bench_smallcnn_step)->Arg(128);

}  // namespace
