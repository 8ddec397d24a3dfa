#include <benchmark/benchmark.h>

#include "sinsim/losses.hpp"
#include "sinsim/model.hpp"
#include "sinsim/numerics.hpp"
#include "sinsim/ot.hpp"

namespace {

using namespace sinsim;

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const OtProblem prob = OtProblem::uniform(pairwise_sqdist(gaussian(n, 16, rng), gaussian(n, 16, rng)));
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(prob, {0.05, 40, 0.0}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Sinkhorn)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oNSquared);

void BM_ExactOt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const OtProblem prob = OtProblem::uniform(pairwise_sqdist(gaussian(n, 2, rng), gaussian(n, 2, rng)));
  for (auto _ : state) benchmark::DoNotOptimize(exact_ot(prob));
}
BENCHMARK(BM_ExactOt)->Arg(8)->Arg(64)->Arg(256);

void BM_NtXent(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Matrix z1 = gaussian(n, 32, rng), z2 = gaussian(n, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nt_xent(z1, z2, {0.5}));
}
BENCHMARK(BM_NtXent)->Arg(64)->Arg(256);

void BM_SinkhornLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const Matrix h1 = gaussian(n, 128, rng), h2 = gaussian(n, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn_loss(h1, h2, {}));
}
BENCHMARK(BM_SinkhornLoss)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const ModelParams p =
      init_params({{784, 256, 128}, Activation::relu}, {{128, 64, 32}, Activation::relu}, rng);
  const Matrix x = gaussian(2 * n, 784, rng);
  const Matrix gz(2 * n, 32, 1e-3);
  for (auto _ : state) {
    const ForwardResult fw = forward(p, x);
    benchmark::DoNotOptimize(backward(p, fw.trace, Matrix{}, gz));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(64);

}  // namespace
BENCHMARK_MAIN();
