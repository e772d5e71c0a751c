#include "fedmra/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedmra/apportion.hpp"
#include "fedmra/error.hpp"

namespace fedmra {

namespace {

void check_distribution(const std::vector<double>& v, const char* name) {
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError(std::string(name) + " entries must be finite and >= 0");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(std::string(name) + " must sum to 1, got " + std::to_string(sum));
}

std::vector<double> normalise_or_uniform(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (!(sum > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

}  // namespace

void ContributionIndices::validate() const {
  if (b.size() != d.size()) throw ShapeError("contribution indices: b and d cover different client counts");
  if (b.empty()) throw ValidationError("contribution indices: no clients");
  check_distribution(b, "b");
  check_distribution(d, "d");
}

std::uint64_t MemoryPlan::total_assigned() const {
  std::uint64_t n = 0;
  for (const auto& q : per_class) {
    for (const auto& [y, k] : q) n += k;
  }
  return n;
}

std::uint64_t MemoryPlan::total_shortfall() const { return std::accumulate(shortfall.begin(), shortfall.end(), std::uint64_t{0}); }

double model_deviation(const ModelParams& local, const ModelParams& global, DiffMetric metric) {
  if (metric == DiffMetric::l2) return param_l2_norm(param_sub(local, global));
  const double nl = param_l2_norm(local);
  const double ng = param_l2_norm(global);
  if (nl == 0.0 || ng == 0.0) return local == global ? 0.0 : 1.0;
  const double cos = std::clamp(param_dot(local, global) / (nl * ng), -1.0, 1.0);
  return 1.0 - cos;
}

std::vector<double> model_contribution(std::span<const ModelParams> locals, const ModelParams& prev_global,
                                       DiffMetric metric) {
  if (locals.empty()) throw ValidationError("model_contribution: no client models");
  std::vector<double> dev;
  dev.reserve(locals.size());
  for (const auto& w : locals) dev.push_back(model_deviation(w, prev_global, metric));
  return normalise_or_uniform(std::move(dev));
}

std::vector<double> data_contribution(std::span<const ClassHistogram> histograms) {
  if (histograms.empty()) throw ValidationError("data_contribution: no clients");
  ClassHistogram global;
  for (const auto& h : histograms) global += h;
  if (global.total() == 0) throw ValidationError("data_contribution: every client histogram is empty");

  std::vector<double> raw;
  raw.reserve(histograms.size());
  for (const auto& h : histograms) {
    double s = 0.0;
    for (const auto& [y, n] : h.counts()) s += static_cast<double>(n) / static_cast<double>(global.count(y));
    raw.push_back(s);
  }
  return normalise_or_uniform(std::move(raw));
}

std::vector<std::uint64_t> client_memory_split(const ContributionIndices& indices, std::uint64_t pool,
                                               std::uint64_t m_min, std::uint64_t m_max) {
  indices.validate();
  if (m_min > m_max) {
    throw ValidationError("client_memory_split: m_min (" + std::to_string(m_min) + ") > m_max (" +
                          std::to_string(m_max) + ")");
  }
  const std::size_t clients = indices.b.size();
  if (clients * m_min > pool) {
    throw ValidationError("client_memory_split: C * m_min (" + std::to_string(clients * m_min) + ") > M (" +
                          std::to_string(pool) + ")");
  }
  const std::uint64_t target = std::min<std::uint64_t>(pool, clients * m_max);

  std::vector<double> weight(clients);
  for (std::size_t c = 0; c < clients; ++c) weight[c] = indices.b[c] + indices.d[c];
  std::vector<double> lo(clients, static_cast<double>(m_min));
  std::vector<double> hi(clients, static_cast<double>(m_max));
  const auto shares = waterfill(weight, static_cast<double>(target), lo, hi);

  std::vector<std::uint64_t> ilo(clients, m_min), ihi(clients, m_max);
  return round_bounded(shares, target, ilo, ihi);
}

namespace {

ClassSplit split_by_scores(const std::vector<ClassId>& classes, const std::vector<double>& scores, std::uint64_t m_c,
                           const std::optional<ClassHistogram>& availability) {
  ClassSplit out;
  if (classes.empty()) {
    out.shortfall = m_c;
    return out;
  }
  const std::size_t n = classes.size();
  std::vector<double> lo(n, 0.0), hi(n);
  std::vector<std::uint64_t> ilo(n, 0), ihi(n);
  std::uint64_t cap_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t cap = availability ? availability->count(classes[i]) : m_c;
    ihi[i] = cap;
    hi[i] = static_cast<double>(cap);
    cap_total += cap;
  }
  const std::uint64_t placeable = std::min(m_c, cap_total);
  out.shortfall = m_c - placeable;

  double score_sum = 0.0;
  for (double s : scores) score_sum += s;
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = score_sum > 0.0 ? scores[i] / score_sum : 1.0 / static_cast<double>(n);

  const auto shares = waterfill(norm, static_cast<double>(placeable), lo, hi);
  const auto counts = round_bounded(shares, placeable, ilo, ihi);
  for (std::size_t i = 0; i < n; ++i) out.quotas[classes[i]] = counts[i];
  return out;
}

}  // namespace

ClassSplit class_memory_split(const ClassHistogram& client_hist, const ClassHistogram& global_hist, double a,
                              std::uint64_t m_c, const std::optional<ClassHistogram>& availability) {
  if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("class_memory_split: a must lie in [0, 1]");
  std::vector<ClassId> classes;
  std::vector<double> scores;
  const double n_c = static_cast<double>(client_hist.total());
  for (const auto& [y, n] : client_hist.counts()) {
    const std::uint64_t n_y = global_hist.count(y);
    if (n_y < n) {
      throw ValidationError("class_memory_split: client holds " + std::to_string(n) + " samples of class " +
                            std::to_string(y) + " but the global histogram has " + std::to_string(n_y));
    }
    const double cn = static_cast<double>(n);
    classes.push_back(y);
    scores.push_back((1.0 - a) * cn / n_c + a * cn / static_cast<double>(n_y));
  }
  return split_by_scores(classes, scores, m_c, availability);
}

ClassSplit uniform_class_split(const ClassHistogram& client_hist, std::uint64_t m_c) {
  std::vector<ClassId> classes;
  for (const auto& [y, n] : client_hist.counts()) classes.push_back(y);
  return split_by_scores(classes, std::vector<double>(classes.size(), 1.0), m_c, client_hist);
}

namespace {

MemoryPlan fixed_equal_plan(std::span<const ClassHistogram> histograms, const FederationConfig& config) {
  const std::size_t clients = histograms.size();
  const std::uint64_t share = std::clamp<std::uint64_t>(config.pool / clients, config.m_min, config.m_max);
  MemoryPlan plan;
  for (std::size_t c = 0; c < clients; ++c) {
    auto split = uniform_class_split(histograms[c], share);
    plan.per_client.push_back(share);
    plan.per_class.push_back(std::move(split.quotas));
    plan.shortfall.push_back(split.shortfall);
  }
  return plan;
}

}  // namespace

MemoryPlan build_memory_plan(const ContributionIndices& indices, std::span<const ClassHistogram> histograms,
                             const FederationConfig& config) {
  if (indices.b.size() != histograms.size()) {
    throw ValidationError("build_memory_plan: " + std::to_string(indices.b.size()) + " index entries for " +
                          std::to_string(histograms.size()) + " client histograms");
  }
  if (config.allocation_mode == AllocationMode::fixed_equal) return fixed_equal_plan(histograms, config);

  ClassHistogram global;
  for (const auto& h : histograms) global += h;

  MemoryPlan plan;
  plan.indices = indices;
  plan.per_client = client_memory_split(indices, config.pool, config.m_min, config.m_max);
  for (std::size_t c = 0; c < histograms.size(); ++c) {
    auto split = class_memory_split(histograms[c], global, config.mix_a, plan.per_client[c], histograms[c]);
    plan.per_class.push_back(std::move(split.quotas));
    plan.shortfall.push_back(split.shortfall);
  }
  return plan;
}

MemoryPlan build_memory_plan(std::span<const ModelParams> locals, const ModelParams& prev_global,
                             std::span<const ClassHistogram> histograms, const FederationConfig& config) {
  if (locals.size() != histograms.size()) {
    throw ValidationError("build_memory_plan: " + std::to_string(locals.size()) + " client models but " +
                          std::to_string(histograms.size()) + " histograms");
  }
  if (histograms.empty()) throw ValidationError("build_memory_plan: no clients");
  if (config.allocation_mode == AllocationMode::fixed_equal) return fixed_equal_plan(histograms, config);
  ContributionIndices indices{model_contribution(locals, prev_global, config.diff_metric),
                              data_contribution(histograms)};
  return build_memory_plan(indices, histograms, config);
}

}  // namespace fedmra
