#include <benchmark/benchmark.h>

#include "mlc/cat.hpp"
#include "mlc/cdi.hpp"
#include "mlc/irt.hpp"

namespace {

mlc::irt::ItemBank make_bank(std::size_t n_items) {
    mlc::irt::ItemBank bank;
    bank.model_kind = mlc::irt::ModelKind::dichotomous;
    for (std::size_t i = 0; i < n_items; ++i)
        bank.dichotomous.push_back({1.0 + 0.05 * i, -2.0 + 4.0 * i / n_items});
    return bank;
}

void BM_prob_correct_2pl(benchmark::State& state) {
    const mlc::irt::DichotomousItem item{1.3, 0.4};
    double theta = -3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlc::irt::prob_correct_2pl(theta, item));
        theta += 1e-6;
    }
}
BENCHMARK(BM_prob_correct_2pl);

void BM_estimate_cdi(benchmark::State& state) {
    const auto bank = make_bank(static_cast<std::size_t>(state.range(0)));
    auto [rm, thetas] = mlc::irt::simulate_responses(bank, 1, 42);
    for (auto _ : state)
        benchmark::DoNotOptimize(mlc::cdi::estimate_cdi(rm.codes[0], bank));
}
BENCHMARK(BM_estimate_cdi)->Arg(10)->Arg(25)->Arg(100);

void BM_fit_2pl(benchmark::State& state) {
    const auto bank = make_bank(10);
    auto [rm, thetas] =
        mlc::irt::simulate_responses(bank, static_cast<int>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(mlc::irt::fit_2pl(rm));
}
BENCHMARK(BM_fit_2pl)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_cat_loop(benchmark::State& state) {
    std::vector<mlc::cat::PoolCase> pool;
    mlc::Rng rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 2000; ++i)
        pool.push_back({"case_" + std::to_string(i), normal(rng)});
    mlc::cat::CatConfig config;
    config.seed = 3;
    const mlc::cat::CasePredictor oracle = [&](const std::string&) {
        return mlc::ClassLabel::class1;  // always correct: worst-case climb
    };
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mlc::cat::run_cat(oracle, pool, mlc::ClassLabel::class1, config, pool.size()));
}
BENCHMARK(BM_cat_loop)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
