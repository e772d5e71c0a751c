#include <benchmark/benchmark.h>

#include <random>

#include "fedmra/allocator.hpp"
#include "fedmra/client.hpp"
#include "fedmra/mlp.hpp"
#include "fedmra/scenario.hpp"
#include "fedmra/server.hpp"

using namespace fedmra;

namespace {

void BM_BuildMemoryPlan(benchmark::State& state) {
  const auto clients = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> count(0, 200);
  std::vector<ClassHistogram> hists;
  std::vector<double> b;
  for (std::size_t c = 0; c < clients; ++c) {
    std::map<ClassId, std::uint64_t> m;
    for (ClassId y = 0; y < 13; ++y) m[y] = count(rng);
    hists.emplace_back(m);
    b.push_back(1.0 + static_cast<double>(c));
  }
  double sum = 0.0;
  for (double v : b) sum += v;
  for (auto& v : b) v /= sum;
  const ContributionIndices idx{b, data_contribution(hists)};
  FederationConfig cfg;
  cfg.pool = 240 * clients;
  for (auto _ : state) benchmark::DoNotOptimize(build_memory_plan(idx, hists, cfg));
}
BENCHMARK(BM_BuildMemoryPlan)->Arg(5)->Arg(50)->Arg(500);

void BM_Backward(benchmark::State& state) {
  const MlpSpec spec{16, {32, 16}, 13};
  const auto p = init_params(spec, 2);
  const auto ds = make_gaussian_dataset(13, 5, 16, std::nullopt, 3);
  const auto x = features_of(ds);
  const auto y = ds.labels();
  const auto teacher = forward(p, spec, x);
  for (auto _ : state) benchmark::DoNotOptimize(backward(p, spec, x, y, teacher, 0.1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows));
}
BENCHMARK(BM_Backward);

void BM_UpdateInfoModel(benchmark::State& state) {
  const MlpSpec spec{16, {32, 16}, 13};
  const auto w = init_params(spec, 4);
  const auto ds = make_gaussian_dataset(13, 20, 16, std::nullopt, 5);
  const InfoModelOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(update_info_model(w, w, spec, ds.samples(), opts));
}
BENCHMARK(BM_UpdateInfoModel)->Unit(benchmark::kMillisecond);

void BM_Round(benchmark::State& state) {
  RunConfig cfg;
  const auto sc = build_scenario(cfg, 0);
  const MlpSpec spec{cfg.feature_dim, cfg.hidden, 4};
  const auto w = init_params(spec, 1);
  std::vector<ClientState> clients(cfg.fed.num_clients);
  for (std::size_t c = 0; c < clients.size(); ++c) {
    clients[c].client_id = c;
    clients[c].params = w;
    clients[c].info_model = w;
    assign_task_data(clients[c], sc.partition.per_task_per_client[0][c]);
  }
  const ExecOptions exec{static_cast<std::size_t>(state.range(0)), false};
  for (auto _ : state) benchmark::DoNotOptimize(run_round(GlobalState{w, w, 0, 1, {}}, clients, spec, cfg.fed, exec));
}
BENCHMARK(BM_Round)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
