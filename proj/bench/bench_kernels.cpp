#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flowseg/conv.hpp"
#include "flowseg/field.hpp"
#include "flowseg/reference.hpp"
#include "flowseg/solver.hpp"

using namespace flowseg;

namespace {

ScalarField random_field(std::size_t side, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ScalarField f(GridDomain(side, side));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng);
  return f;
}

CapacityMaps random_caps(std::size_t side) {
  return {random_field(side, 1, 0, 1), random_field(side, 2, 0, 1), random_field(side, 3, 0, 0.5)};
}

VectorField random_flow(std::size_t side) { return {random_field(side, 4, -1, 1), random_field(side, 5, -1, 1)}; }

void BM_Gradient(benchmark::State& state) {
  const ScalarField u = random_field(state.range(0), 0, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gradient(u));
}

void BM_GradientSerial(benchmark::State& state) {
  const ScalarField u = random_field(state.range(0), 0, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::gradient(u));
}

void BM_Divergence(benchmark::State& state) {
  const VectorField p = random_flow(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(divergence(p));
}

void BM_DivergenceSerial(benchmark::State& state) {
  const VectorField p = random_flow(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::divergence(p));
}

void BM_Project(benchmark::State& state) {
  const VectorField p = random_flow(state.range(0));
  const ScalarField cap = random_field(state.range(0), 6, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(project_vector_capacity(p, cap, TvMode::isotropic));
}

void BM_ProjectSerial(benchmark::State& state) {
  const VectorField p = random_flow(state.range(0));
  const ScalarField cap = random_field(state.range(0), 6, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::project_vector_capacity(p, cap, TvMode::isotropic));
}

void BM_Solve(benchmark::State& state) {
  const CapacityMaps caps = random_caps(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve(caps, SolverConfig{}));
}

void BM_SolveSerial(benchmark::State& state) {
  const CapacityMaps caps = random_caps(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::solve(caps, SolverConfig{}));
}

struct ConvCase {
  Tensor3 in;
  std::vector<double> weight, bias;
  ConvShape shape;

  explicit ConvCase(std::size_t side) : in(8, side, side), shape{8, 16, 5, 1, 2, 0} {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist;
    for (double& v : in.data) v = dist(rng);
    weight.resize(16 * 8 * 25);
    for (double& v : weight) v = 0.1 * dist(rng);
    bias.assign(16, 0.01);
  }
};

void BM_Conv(benchmark::State& state) {
  const ConvCase c(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(c.in, c.weight, c.bias, c.shape));
}

void BM_ConvSerial(benchmark::State& state) {
  const ConvCase c(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(c.in, c.weight, c.bias, c.shape));
}

}  // namespace

BENCHMARK(BM_Gradient)->Arg(64)->Arg(256);
BENCHMARK(BM_GradientSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_Divergence)->Arg(64)->Arg(256);
BENCHMARK(BM_DivergenceSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_Project)->Arg(64)->Arg(256);
BENCHMARK(BM_ProjectSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_Solve)->Arg(64)->Arg(128);
BENCHMARK(BM_SolveSerial)->Arg(64)->Arg(128);
BENCHMARK(BM_Conv)->Arg(32)->Arg(64);
BENCHMARK(BM_ConvSerial)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
