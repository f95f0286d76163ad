#include <random>

#include <benchmark/benchmark.h>

#include "dtfl/dense_net.hpp"
#include "dtfl/kernels.hpp"

namespace {

using dtfl::Exec;
using dtfl::kernels::Matrix;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.data) x = n(rng);
  return m;
}

template <Exec E>
void BM_DenseForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(batch, width, 1);
  const Matrix w = random_matrix(width, width, 2);
  const std::vector<double> b(width, 0.1);
  Matrix y;
  for (auto _ : state) {
    dtfl::kernels::dense_forward(x, w.data, b, y, E);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * width * width));
}

template <Exec E>
void BM_DenseBackwardParams(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(batch, width, 3);
  const Matrix dy = random_matrix(batch, width, 4);
  std::vector<double> dw(width * width), db(width);
  for (auto _ : state) {
    dtfl::kernels::dense_backward_params(x, dy, dw, db, E);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * width * width));
}

void BM_DenseForwardReference(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(batch, width, 1);
  const Matrix w = random_matrix(width, width, 2);
  const std::vector<double> b(width, 0.1);
  Matrix y;
  for (auto _ : state) {
    dtfl::kernels::reference::dense_forward(x, w.data, b, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * width * width));
}

template <Exec E>
void BM_CriticStep(benchmark::State& state) {
  dtfl::maddpg::DenseNet net({280, 64, 64, 1}, dtfl::maddpg::Activation::relu, dtfl::maddpg::Activation::linear);
  dtfl::Rng rng(5);
  net.init(rng);
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 280, 6);
  Matrix dy(x.rows, 1, 1.0 / static_cast<double>(x.rows));
  std::vector<double> grad(net.num_params());
  dtfl::maddpg::DenseNet::Cache cache;
  for (auto _ : state) {
    net.forward(x, cache, E);
    net.backward(cache, dy, grad, nullptr, E);
    benchmark::DoNotOptimize(grad.data());
  }
}

}  // namespace

BENCHMARK(BM_DenseForward<Exec::serial>)->Args({32, 64})->Args({256, 256});
BENCHMARK(BM_DenseForward<Exec::parallel>)->Args({32, 64})->Args({256, 256});
BENCHMARK(BM_DenseForwardReference)->Args({32, 64})->Args({256, 256});
BENCHMARK(BM_DenseBackwardParams<Exec::serial>)->Args({32, 64})->Args({256, 256});
BENCHMARK(BM_DenseBackwardParams<Exec::parallel>)->Args({32, 64})->Args({256, 256});
BENCHMARK(BM_CriticStep<Exec::serial>)->Arg(32)->Arg(256);
BENCHMARK(BM_CriticStep<Exec::parallel>)->Arg(32)->Arg(256);

BENCHMARK_MAIN();
