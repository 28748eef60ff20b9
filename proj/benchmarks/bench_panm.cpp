#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "panm/engine.hpp"
#include "panm/learner.hpp"
#include "panm/matching.hpp"
#include "panm/theory.hpp"

namespace {

void BM_SelectionSeries(benchmark::State& state) {
    const panm::theory::BallSelectionSetting s{200, 50, 10, 5};
    for (auto _ : state) {
        auto series = panm::theory::nsmc_prob_series(static_cast<int>(state.range(0)), s);
        benchmark::DoNotOptimize(series.data());
    }
}
BENCHMARK(BM_SelectionSeries)->Arg(5)->Arg(10)->Arg(20);

void BM_EmFit(benchmark::State& state) {
    const int half = static_cast<int>(state.range(0)) / 2;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> lo(0.2, 0.05), hi(0.8, 0.05);
    std::vector<panm::matching::ScoredPeer> values;
    std::vector<std::uint8_t> init;
    for (int i = 0; i < half; ++i) values.push_back({i, lo(rng)});
    for (int i = 0; i < half; ++i) values.push_back({half + i, hi(rng)});
    for (int i = 0; i < 2 * half; ++i) init.push_back(static_cast<std::uint8_t>(rng() & 1));
    for (auto _ : state) {
        auto est = panm::matching::em_fit(values, init);
        benchmark::DoNotOptimize(est.assignments.data());
    }
}
BENCHMARK(BM_EmFit)->Arg(20)->Arg(60)->Arg(200);

void BM_LocalTrain(benchmark::State& state) {
    panm::learner::SyntheticTaskParams p;
    p.n = 2;
    p.r = 2;
    p.d = static_cast<int>(state.range(0));
    p.test_size = 10;
    p.num_classes = 10;
    p.feature_dim = 20;
    const auto tasks = panm::learner::make_synthetic_clustered_tasks(p);
    panm::learner::ModelSpec spec;
    spec.kind = panm::learner::ModelKind::mlp;
    spec.input_dim = p.feature_dim;
    spec.hidden_dims = {16};
    spec.num_classes = p.num_classes;
    const auto w0 = panm::learner::init_params(spec, 3);
    for (auto _ : state) {
        panm::learner::OptimizerState opt;
        auto w = panm::learner::local_train(w0, spec, tasks.clients[0].train, 1, 32, opt, 11);
        benchmark::DoNotOptimize(w.data());
    }
}
BENCHMARK(BM_LocalTrain)->Arg(100)->Arg(200);

void BM_Simulation(benchmark::State& state) {
    panm::engine::RunConfig c;
    c.n = 8;
    c.r = 2;
    c.l = 4;
    c.k = 2;
    c.T1 = 4;
    c.T2 = 4;
    c.tau = 2;
    c.method = panm::engine::Method::panm_loss;
    c.d = 40;
    c.test_size = 10;
    c.num_classes = 4;
    c.feature_dim = 8;
    c.model = panm::learner::ModelKind::linear;
    c.epochs = 1;
    c.batch_size = 16;
    c.loss_eval_subsample = 16;
    for (auto _ : state) {
        auto res = panm::engine::run_simulation(c);
        benchmark::DoNotOptimize(res.measured_transfers);
    }
}
BENCHMARK(BM_Simulation);

}  // namespace

BENCHMARK_MAIN();
