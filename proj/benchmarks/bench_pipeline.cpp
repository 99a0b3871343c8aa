// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include <set>

#include <benchmark/benchmark.h>

#include "fudoba/bayesopt.hpp"
#include "fudoba/evaluator.hpp"
#include "fudoba/fusion.hpp"
#include "fudoba/numerics.hpp"
#include "synthetic.hpp"

namespace {

using namespace fudoba;

void BM_TruncatedSvd(benchmark::State& state) {
  Rng rng(1);
  const auto a = testing::gaussian_matrix(state.range(0), state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_truncated_svd(a, 16));
}
BENCHMARK(BM_TruncatedSvd)->Args({200, 64})->Args({1000, 256})->Unit(benchmark::kMillisecond);

void BM_FuseCached(benchmark::State& state) {
  const auto set = testing::make_random_set(static_cast<std::size_t>(state.range(0)), {256, 128, 64}, 2, 2);
  const ProjectionCache cache(set.matrices, set.labels, 64, {});
  const FusionConfig cfg{{{"llm", 64, 1.0}, {"kg", 32, 0.8}, {"lockg", 16, 0.1}}};
  for (auto _ : state) benchmark::DoNotOptimize(cache.fuse(cfg));
}
BENCHMARK(BM_FuseCached)->Arg(500)->Arg(2000)->Unit(benchmark::kMicrosecond);

void BM_EvaluateObjective(benchmark::State& state) {
  const auto set = testing::make_signal_and_noise(static_cast<std::size_t>(state.range(0)), 3, 64);
  const auto fused = fuse(set.matrices, set.labels, {{{"llm", 32, 1.0}, {"kg", 16, 0.2}, {"lockg", 16, 0.1}}});
  CVConfig cv;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_objective(fused, cv));
}
BENCHMARK(BM_EvaluateObjective)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_ProposeNext(benchmark::State& state) {
  const auto space = SearchSpace::with_defaults({"llm", "kg", "lockg"});
  const ThetaEncoding encoding(space);
  Rng rng(4);
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  std::set<std::size_t> evaluated;
  for (int i = 0; i < state.range(0); ++i) {
    const auto idx = uniform_below(rng, space.size());
    evaluated.insert(idx);
    xs.push_back(encoding.encode(space.config_at(idx)));
    ys.push_back(uniform01(rng));
  }
  const auto gp = GaussianProcess::fit(xs, ys);
  const double best = *std::max_element(ys.begin(), ys.end());
  for (auto _ : state) benchmark::DoNotOptimize(propose_next(gp, encoding, evaluated, best));
}
BENCHMARK(BM_ProposeNext)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
