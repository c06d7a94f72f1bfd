#include <benchmark/benchmark.h>

#include <vector>

#include "lmdnn/loss.hpp"
#include "lmdnn/network.hpp"
#include "lmdnn/optim.hpp"
#include "lmdnn/rng.hpp"

namespace {

lmdnn::Matrix random_batch(int rows, int cols, std::uint64_t seed) {
  lmdnn::Matrix m(rows, cols);
  lmdnn::rng::Engine eng(seed);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = lmdnn::rng::uniform(eng, -1.0, 1.0);
  }
  return m;
}

std::vector<int> random_labels(int rows, int classes, std::uint64_t seed) {
  lmdnn::rng::Engine eng(seed);
  std::vector<int> labels(rows);
  for (auto& y : labels) y = static_cast<int>(eng() % classes) + 1;
  return labels;
}

lmdnn::NetworkSpec mlp_spec() {
  const int hidden[] = {300};
  return lmdnn::make_mlp_spec(784, 1.0, hidden, 10, lmdnn::Activation::Sigmoid);
}

void BM_Forward(benchmark::State& state) {
  const auto net = lmdnn::build(mlp_spec(), 1);
  const auto batch = random_batch(64, 784, 2);
  for (auto _ : state) {
    auto [outputs, trace] = lmdnn::forward(net, batch);
    benchmark::DoNotOptimize(outputs(0, 0));
  }
}
BENCHMARK(BM_Forward);

void BM_ForwardBackward(benchmark::State& state) {
  const auto net = lmdnn::build(mlp_spec(), 1);
  const auto batch = random_batch(64, 784, 2);
  const auto labels = random_labels(64, 10, 3);
  const auto kind = lmdnn::LossKind::c1(1.0);
  for (auto _ : state) {
    auto [outputs, trace] = lmdnn::forward(net, batch);
    auto [value, grad] = lmdnn::batch_loss_and_grad(kind, outputs, labels);
    auto grads = lmdnn::backward(net, trace, grad);
    benchmark::DoNotOptimize(grads.weights[0](0, 0));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_TrainStep(benchmark::State& state) {
  auto net = lmdnn::build(mlp_spec(), 1);
  const auto batch = random_batch(64, 784, 2);
  const auto labels = random_labels(64, 10, 3);
  lmdnn::TrainConfig config;
  config.loss = lmdnn::LossKind::cross_entropy();
  auto opt = lmdnn::OptimizerState::for_network(net);
  for (auto _ : state) {
    auto [outputs, trace] = lmdnn::forward(net, batch);
    auto [value, grad] = lmdnn::batch_loss_and_grad(config.loss, outputs, labels);
    auto grads = lmdnn::backward(net, trace, grad);
    lmdnn::sgd_step(net, grads, opt, config);
    benchmark::DoNotOptimize(net.weights[0](0, 0));
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
