#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fedmra/allocator.hpp"
#include "fedmra/client.hpp"
#include "fedmra/config.hpp"
#include "fedmra/mlp.hpp"
#include "fedmra/report.hpp"
#include "fedmra/scenario.hpp"

namespace fedmra {

struct GlobalState {
  ModelParams params;             // current global model
  ModelParams task_start_params;  // global model the current task started from
  std::size_t task_index = 0;
  std::size_t round_index = 0;
  std::vector<MemoryPlan> plan_history;
};

// Execution settings that never change results.
struct ExecOptions {
  std::size_t threads = 1;         // client-level parallelism within a round
  bool record_wall_clock = false;  // wall-clock time in the report breaks byte equality
};

struct ClientUpdate {
  const ModelParams* params = nullptr;
  std::uint64_t sample_count = 0;
};

// sum_c (n_c / N) w_c, accumulated in the given (client id) order.
ModelParams fedavg_aggregate(std::span<const ClientUpdate> updates);
ModelParams fedavg_aggregate(std::span<const std::pair<ModelParams, std::uint64_t>> updates);

struct RoundResult {
  GlobalState global;
  std::vector<ClientState> clients;
};

// One communication round: every client trains from the global model on
// its data plus cache, then the server averages weighted by those sizes.
RoundResult run_round(GlobalState global, std::vector<ClientState> clients, const MlpSpec& spec,
                      const FederationConfig& config, const ExecOptions& exec = {});

struct BoundaryResult {
  GlobalState global;
  std::vector<ClientState> clients;
  MlpSpec spec;
};

// Closes the current task: allocates the exemplar pool, refreshes every
// client's cache, grows the head for the next task's classes and moves
// the counters on. Requires round_index == rounds_per_task.
BoundaryResult task_boundary(GlobalState global, std::vector<ClientState> clients, const TaskSpec& next_task,
                             const MlpSpec& spec, const FederationConfig& config, const ExecOptions& exec = {});

// All tasks and rounds, with evaluation after each task.
ExperimentReport run_experiment(const Scenario& scenario, const RunConfig& config, const ExecOptions& exec = {});

// Builds the scenario from the config's seed and runs it.
ExperimentReport run_experiment(const RunConfig& config, const ExecOptions& exec = {});

}  // namespace fedmra
