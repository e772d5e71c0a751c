#include "fedmra/server.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <string>
#include <thread>

#include "fedmra/error.hpp"
#include "fedmra/rng.hpp"

namespace fedmra {

ModelParams fedavg_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ValidationError("fedavg_aggregate: no client updates");
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    if (!u.params) throw ValidationError("fedavg_aggregate: null update");
    if (!u.params->same_layout(*updates.front().params)) {
      throw ShapeError("fedavg_aggregate: layouts " + to_string(u.params->shapes()) + " and " +
                       to_string(updates.front().params->shapes()) + " differ");
    }
    total += u.sample_count;
  }
  if (total == 0) throw ValidationError("fedavg_aggregate: clients report zero samples in total");

  std::vector<double> acc(updates.front().params->size(), 0.0);
  const double n = static_cast<double>(total);
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.sample_count) / n;
    const auto v = u.params->values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
  return ModelParams(updates.front().params->shapes(), std::move(acc));
}

ModelParams fedavg_aggregate(std::span<const std::pair<ModelParams, std::uint64_t>> updates) {
  std::vector<ClientUpdate> refs;
  refs.reserve(updates.size());
  for (const auto& [p, n] : updates) refs.push_back({&p, n});
  return fedavg_aggregate(refs);
}

namespace {

// Calls fn(c) for every client, possibly on several threads. Work is
// assigned statically and results land in per-client slots, so the outcome
// never depends on scheduling.
template <typename Fn>
void for_each_client(std::size_t clients, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, clients);
  if (threads == 1) {
    for (std::size_t c = 0; c < clients; ++c) fn(c);
    return;
  }
  std::vector<std::exception_ptr> errors(clients);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t c = k; c < clients; c += threads) {
          try {
            fn(c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

RoundResult run_round(GlobalState global, std::vector<ClientState> clients, const MlpSpec& spec,
                      const FederationConfig& config, const ExecOptions& exec) {
  if (clients.empty()) throw ValidationError("run_round: no clients");
  const TrainContext ctx{global.task_index, global.round_index,
                         !(global.task_index == 0 && global.round_index == 0)};
  for_each_client(clients.size(), exec.threads, [&](std::size_t c) {
    clients[c].params = local_train(clients[c], global.params, spec, config, ctx);
  });

  std::vector<ClientUpdate> updates;
  updates.reserve(clients.size());
  for (const auto& cl : clients) {
    updates.push_back({&cl.params, cl.current_data.size() + cl.cache.size()});
  }
  global.params = fedavg_aggregate(updates);
  ++global.round_index;
  return {std::move(global), std::move(clients)};
}

BoundaryResult task_boundary(GlobalState global, std::vector<ClientState> clients, const TaskSpec& next_task,
                             const MlpSpec& spec, const FederationConfig& config, const ExecOptions& exec) {
  if (global.round_index != config.rounds_per_task) {
    throw ValidationError("task_boundary: task " + std::to_string(global.task_index) + " finished only " +
                          std::to_string(global.round_index) + " of " + std::to_string(config.rounds_per_task) +
                          " rounds");
  }

  std::vector<ModelParams> locals;
  std::vector<ClassHistogram> histograms;
  for (const auto& cl : clients) {
    locals.push_back(cl.params);
    const auto replay = cl.replay_set();
    histograms.push_back(ClassHistogram::of(std::span(replay)));
  }
  MemoryPlan plan = build_memory_plan(locals, global.task_start_params, histograms, config);

  for_each_client(clients.size(), exec.threads, [&](std::size_t c) {
    clients[c] = refresh_cache(clients[c], plan, global.params, spec, config, global.task_index);
  });

  std::size_t head = spec.num_classes;
  for (auto y : next_task.class_set) head = std::max<std::size_t>(head, y + 1);
  MlpSpec grown = spec;
  if (head != spec.num_classes) {
    grown = expand_head(global.params, spec, head).second;
    global.params = expand_head(global.params, spec, head).first;
    for (auto& cl : clients) {
      cl.params = expand_head(cl.params, spec, head).first;
      cl.info_model = expand_head(cl.info_model, spec, head).first;
    }
  }

  global.plan_history.push_back(std::move(plan));
  global.task_start_params = global.params;
  ++global.task_index;
  global.round_index = 0;
  return {std::move(global), std::move(clients), grown};
}

ExperimentReport run_experiment(const Scenario& scenario, const RunConfig& config, const ExecOptions& exec) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto& fed = config.fed;
  const auto& tasks = scenario.stream.tasks;
  if (scenario.partition.per_task_per_client.size() != tasks.size() || scenario.test_sets.size() != tasks.size()) {
    throw ValidationError("run_experiment: scenario data does not cover every task");
  }

  MlpSpec spec{scenario.feature_dim, config.hidden, 0};
  for (auto y : tasks.front().class_set) spec.num_classes = std::max<std::size_t>(spec.num_classes, y + 1);
  spec.num_classes = std::max<std::size_t>(spec.num_classes, 2);

  GlobalState global;
  global.params = init_params(spec, derive_seed(fed.seed, StreamTag::init));
  global.task_start_params = global.params;

  std::vector<ClientState> clients(fed.num_clients);
  for (std::size_t c = 0; c < fed.num_clients; ++c) {
    clients[c].client_id = c;
    clients[c].params = global.params;
    clients[c].info_model = global.params;
  }

  ExperimentReport report;
  report.config = config;
  report.config.num_seeds = 1;
  report.seed = fed.seed;
  report.scenario = scenario.stream.scenario;

  std::uint64_t total_samples = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& shards = scenario.partition.per_task_per_client[t];
    if (shards.size() != fed.num_clients) throw ValidationError("run_experiment: partition client count mismatch");
    for (std::size_t c = 0; c < fed.num_clients; ++c) {
      assign_task_data(clients[c], shards[c]);
      total_samples += shards[c].size();
    }

    for (std::size_t r = 0; r < fed.rounds_per_task; ++r) {
      auto res = run_round(std::move(global), std::move(clients), spec, fed, exec);
      global = std::move(res.global);
      clients = std::move(res.clients);
    }

    TaskAccuracy acc;
    acc.task = t;
    std::size_t correct = 0, seen = 0;
    for (std::size_t tau = 0; tau <= t; ++tau) {
      const auto& test = scenario.test_sets[tau];
      const std::size_t k = count_correct(global.params, spec, test.samples());
      acc.per_subset.push_back(test.is_empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(test.size()));
      correct += k;
      seen += test.size();
    }
    acc.overall = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    report.per_task.push_back(std::move(acc));

    if (t + 1 < tasks.size()) {
      auto res = task_boundary(std::move(global), std::move(clients), tasks[t + 1], spec, fed, exec);
      global = std::move(res.global);
      clients = std::move(res.clients);
      spec = res.spec;
      report.allocation_trace.push_back(AllocationRecord::from_plan(t, global.plan_history.back()));
    }
  }

  std::vector<double> overall;
  for (const auto& row : report.per_task) overall.push_back(row.overall);
  const auto s = summarize(overall);
  report.a_avg = s.a_avg;
  report.a_last = s.a_last;
  report.cost_estimate = estimate_costs(fed.num_clients, fed.rounds_per_task * tasks.size(), fed.info_model_iters,
                                        spec.param_count(), total_samples, spec.num_classes);
  if (exec.record_wall_clock) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return report;
}

ExperimentReport run_experiment(const RunConfig& config, const ExecOptions& exec) {
  return run_experiment(build_scenario(config, config.fed.seed), config, exec);
}

}  // namespace fedmra
