#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "fedmra/allocator.hpp"
#include "fedmra/config.hpp"
#include "fedmra/data.hpp"
#include "fedmra/mlp.hpp"
#include "fedmra/params.hpp"

namespace fedmra {

struct ClientState {
  std::size_t client_id = 0;
  ModelParams params;      // last local model
  ModelParams info_model;  // personal information model used for scoring
  std::vector<LabeledSample> cache;
  Dataset current_data;
  ClassHistogram histogram;  // of current_data

  // current_data followed by the cache.
  std::vector<LabeledSample> replay_set() const;
};

// Replace the client's task data and recompute its histogram.
void assign_task_data(ClientState& state, Dataset data);

// Mean squared per-sample gradient norm accumulated by the info model.
struct SampleScore {
  SampleUid uid = 0;
  ClassId label = 0;
  double mean_sq_grad_norm = 0.0;

  friend bool operator==(const SampleScore&, const SampleScore&) = default;
};

// q(lambda) = (1 - lambda) / (2 lambda)
double info_model_coefficient(double lambda);

// One info-model iteration given the gradient displacement already
// accumulated over the data: v_start - lr * grad_sum + q(lambda) * (v_start - global).
ModelParams info_model_step(const ModelParams& v_start, const ModelParams& grad_sum, const ModelParams& global,
                            double lr, double lambda);

struct InfoModelOptions {
  double lr = 0.001;
  double lambda = 0.4;
  std::size_t iters = 3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;  // batch order stream
  std::size_t client_id = 0;
  std::size_t task = 0;
};

struct InfoModelUpdate {
  ModelParams info_model;
  std::vector<SampleScore> scores;  // one per sample, in input order
};

// Runs `iters` passes over the samples. Each pass walks seeded mini-batches,
// stepping v by lr times the batch-summed cross-entropy gradient, then adds
// q(lambda) (v_start - global). After each pass every sample's squared
// single-sample gradient norm is recorded; scores are their means.
// Throws DivergenceError (naming the pass) on a non-finite update.
InfoModelUpdate update_info_model(const ModelParams& info_model, const ModelParams& prev_global, const MlpSpec& spec,
                                  std::span<const LabeledSample> samples, const InfoModelOptions& opts);

struct ExemplarSelection {
  std::vector<LabeledSample> selected;  // by class, then rank
  std::map<ClassId, std::uint64_t> shortfall;  // classes whose quota exceeded the candidates
};

// Per class, candidates sorted by score descending (ties: smaller uid
// first), top quota taken. Every score must refer to a sample in `data`.
ExemplarSelection select_exemplars(std::span<const SampleScore> scores, const ClassQuotas& quotas,
                                   std::span<const LabeledSample> data);

struct TrainContext {
  std::size_t task = 0;
  std::size_t round = 0;
  bool use_teacher = true;  // false on the very first round of the first task
};

// Mini-batch SGD on current_data plus cache, starting from global_params,
// minimising ce + kl(global || local) + delta * mg for local_epochs passes.
ModelParams local_train(const ClientState& state, const ModelParams& global_params, const MlpSpec& spec,
                        const FederationConfig& config, const TrainContext& ctx);

// Rebuilds the exemplar cache from current_data plus the old cache using
// this client's quotas in `plan`. Updates the info model as a side effect.
ClientState refresh_cache(const ClientState& state, const MemoryPlan& plan, const ModelParams& prev_global,
                          const MlpSpec& spec, const FederationConfig& config, std::size_t task);

}  // namespace fedmra
