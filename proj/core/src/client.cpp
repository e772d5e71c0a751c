#include "fedmra/client.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "fedmra/error.hpp"
#include "fedmra/rng.hpp"

namespace fedmra {

std::vector<LabeledSample> ClientState::replay_set() const {
  std::vector<LabeledSample> out = current_data.samples();
  out.insert(out.end(), cache.begin(), cache.end());
  return out;
}

void assign_task_data(ClientState& state, Dataset data) {
  state.histogram = ClassHistogram::of(data);
  state.current_data = std::move(data);
}

double info_model_coefficient(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ValidationError("lambda must lie strictly inside (0, 1)");
  return (1.0 - lambda) / (2.0 * lambda);
}

ModelParams info_model_step(const ModelParams& v_start, const ModelParams& grad_sum, const ModelParams& global,
                            double lr, double lambda) {
  const double q = info_model_coefficient(lambda);
  return param_axpy(q, param_sub(v_start, global), param_axpy(-lr, grad_sum, v_start));
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct Batch {
  Matrix x;
  std::vector<ClassId> y;
};

Batch gather(std::span<const LabeledSample> samples, std::span<const std::size_t> idx, std::size_t feature_dim) {
  Batch b{Matrix(idx.size(), feature_dim), {}};
  b.y.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& s = samples[idx[r]];
    std::copy(s.features.begin(), s.features.end(), b.x.data.begin() + static_cast<std::ptrdiff_t>(r * feature_dim));
    b.y.push_back(s.label);
  }
  return b;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

InfoModelUpdate update_info_model(const ModelParams& info_model, const ModelParams& prev_global, const MlpSpec& spec,
                                  std::span<const LabeledSample> samples, const InfoModelOptions& opts) {
  if (samples.empty()) throw ValidationError("update_info_model: no samples");
  if (opts.iters == 0) throw ValidationError("update_info_model: iters must be >= 1");
  if (opts.batch_size == 0) throw ValidationError("update_info_model: batch_size must be >= 1");
  const double q = info_model_coefficient(opts.lambda);
  if (!info_model.same_layout(prev_global) || info_model.shapes() != spec.layer_shapes()) {
    throw ShapeError("update_info_model: info model " + to_string(info_model.shapes()) + ", global " +
                     to_string(prev_global.shapes()) + ", model " + to_string(spec.layer_shapes()));
  }

  const auto& shapes = info_model.shapes();
  std::vector<double> v(info_model.values().begin(), info_model.values().end());
  const auto g = prev_global.values();
  std::vector<double> grad(v.size());
  std::vector<double> score_sum(samples.size(), 0.0);

  for (std::size_t it = 0; it < opts.iters; ++it) {
    const std::vector<double> v_start = v;
    const auto order = shuffled_indices(
        samples.size(), make_rng(opts.seed, StreamTag::info_batch_order, {opts.client_id, opts.task, it}));
    for (std::size_t pos = 0; pos < order.size(); pos += opts.batch_size) {
      const std::size_t end = std::min(order.size(), pos + opts.batch_size);
      const auto batch = gather(samples, std::span(order).subspan(pos, end - pos), spec.feature_dim);
      try {
        detail::backward_raw(v, shapes, batch.x, batch.y, nullptr, 0.0, grad);
      } catch (const DivergenceError& e) {
        throw DivergenceError("update_info_model: iteration " + std::to_string(it) + ": " + e.what());
      }
      // backward_raw yields the batch mean; the update wants the sum.
      const double step = opts.lr * static_cast<double>(end - pos);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * grad[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += q * (v_start[i] - g[i]);
    if (!all_finite(v)) {
      throw DivergenceError("update_info_model: non-finite info model after iteration " + std::to_string(it));
    }

    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& s = samples[k];
      Matrix x(1, spec.feature_dim, s.features);
      const ClassId y = s.label;
      try {
        detail::backward_raw(v, shapes, x, std::span(&y, 1), nullptr, 0.0, grad);
      } catch (const DivergenceError& e) {
        throw DivergenceError("update_info_model: iteration " + std::to_string(it) + ": " + e.what());
      }
      double sq = 0.0;
      for (double gi : grad) sq += gi * gi;
      if (!std::isfinite(sq)) {
        throw DivergenceError("update_info_model: non-finite gradient norm at iteration " + std::to_string(it));
      }
      score_sum[k] += sq;
    }
  }

  InfoModelUpdate out{ModelParams(shapes, std::move(v)), {}};
  out.scores.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out.scores.push_back({samples[k].uid, samples[k].label, score_sum[k] / static_cast<double>(opts.iters)});
  }
  return out;
}

ExemplarSelection select_exemplars(std::span<const SampleScore> scores, const ClassQuotas& quotas,
                                   std::span<const LabeledSample> data) {
  std::unordered_map<SampleUid, std::size_t> where;
  where.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) where.emplace(data[i].uid, i);

  std::map<ClassId, std::vector<const SampleScore*>> by_class;
  for (const auto& s : scores) {
    if (!where.contains(s.uid)) {
      throw ValidationError("select_exemplars: scored uid " + std::to_string(s.uid) + " is not in the data");
    }
    by_class[s.label].push_back(&s);
  }

  ExemplarSelection out;
  for (const auto& [y, quota] : quotas) {
    if (quota == 0) continue;
    auto it = by_class.find(y);
    const std::size_t available = it == by_class.end() ? 0 : it->second.size();
    if (quota > available) out.shortfall[y] = quota - available;
    if (available == 0) continue;
    auto& cands = it->second;
    std::sort(cands.begin(), cands.end(), [](const SampleScore* a, const SampleScore* b) {
      if (a->mean_sq_grad_norm != b->mean_sq_grad_norm) return a->mean_sq_grad_norm > b->mean_sq_grad_norm;
      return a->uid < b->uid;
    });
    const std::size_t take = std::min<std::size_t>(quota, available);
    for (std::size_t k = 0; k < take; ++k) out.selected.push_back(data[where.at(cands[k]->uid)]);
  }
  return out;
}

ModelParams local_train(const ClientState& state, const ModelParams& global_params, const MlpSpec& spec,
                        const FederationConfig& config, const TrainContext& ctx) {
  if (global_params.shapes() != spec.layer_shapes()) {
    throw ShapeError("local_train: global model " + to_string(global_params.shapes()) + " does not match " +
                     to_string(spec.layer_shapes()));
  }
  const auto samples = state.replay_set();
  if (samples.empty()) throw ValidationError("local_train: client " + std::to_string(state.client_id) + " has no data");
  if (config.batch_size == 0) throw ValidationError("local_train: batch_size must be >= 1");

  const auto& shapes = global_params.shapes();
  const auto teacher = global_params.values();
  std::vector<double> w(teacher.begin(), teacher.end());
  std::vector<double> grad(w.size());

  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    const auto order = shuffled_indices(
        samples.size(), make_rng(config.seed, StreamTag::batch_order, {state.client_id, ctx.task, ctx.round, epoch}));
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const std::size_t end = std::min(order.size(), pos + config.batch_size);
      const auto batch = gather(samples, std::span(order).subspan(pos, end - pos), spec.feature_dim);
      Matrix teacher_logits;
      if (ctx.use_teacher) teacher_logits = detail::forward_raw(teacher, shapes, batch.x);
      LossBreakdown loss;
      try {
        loss = detail::backward_raw(w, shapes, batch.x, batch.y, ctx.use_teacher ? &teacher_logits : nullptr,
                                    config.mg_weight, grad);
      } catch (const DivergenceError&) {
        loss.total = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(loss.total)) {
        throw DivergenceError("local_train: non-finite loss on client " + std::to_string(state.client_id) +
                              ", task " + std::to_string(ctx.task) + ", round " + std::to_string(ctx.round) +
                              ", epoch " + std::to_string(epoch));
      }
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.train_lr * grad[i];
    }
  }
  if (!all_finite(w)) throw DivergenceError("local_train: non-finite parameters on client " + std::to_string(state.client_id));
  return ModelParams(shapes, std::move(w));
}

ClientState refresh_cache(const ClientState& state, const MemoryPlan& plan, const ModelParams& prev_global,
                          const MlpSpec& spec, const FederationConfig& config, std::size_t task) {
  if (state.client_id >= plan.per_class.size()) {
    throw ValidationError("refresh_cache: plan has no entry for client " + std::to_string(state.client_id));
  }
  ClientState next = state;
  const auto candidates = state.replay_set();
  const auto& quotas = plan.per_class[state.client_id];
  const bool wants_any = std::any_of(quotas.begin(), quotas.end(), [](const auto& kv) { return kv.second > 0; });
  if (candidates.empty() || !wants_any) {
    next.cache.clear();
    return next;
  }
  InfoModelOptions opts{config.info_lr, config.momentum_lambda, config.info_model_iters, config.batch_size,
                        config.seed, state.client_id, task};
  auto update = update_info_model(state.info_model, prev_global, spec, candidates, opts);
  next.info_model = std::move(update.info_model);
  next.cache = select_exemplars(update.scores, quotas, candidates).selected;
  return next;
}

}  // namespace fedmra
