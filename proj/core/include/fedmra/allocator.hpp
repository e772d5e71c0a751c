#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fedmra/config.hpp"
#include "fedmra/data.hpp"
#include "fedmra/params.hpp"

namespace fedmra {

// Dual-channel client shares, indexed by client id. Each vector sums to 1.
struct ContributionIndices {
  std::vector<double> b;  // model space: how far each local model moved
  std::vector<double> d;  // data space: share of each class held locally

  void validate() const;
};

using ClassQuotas = std::map<ClassId, std::uint64_t>;

// Exemplar slots handed out for one task boundary.
//
// per_client[c] is the client's pool share m_c. per_class[c] holds the
// per-class quotas actually fillable from the client's samples, and
// shortfall[c] is whatever of m_c could not be backed by samples, so
// sum(per_class[c]) + shortfall[c] == per_client[c].
struct MemoryPlan {
  std::vector<std::uint64_t> per_client;
  std::vector<ClassQuotas> per_class;
  std::vector<std::uint64_t> shortfall;
  std::optional<ContributionIndices> indices;  // absent in fixed_equal mode

  std::uint64_t total_assigned() const;  // sum of per_class quotas
  std::uint64_t total_shortfall() const;

  friend bool operator==(const MemoryPlan& a, const MemoryPlan& b) {
    return a.per_client == b.per_client && a.per_class == b.per_class && a.shortfall == b.shortfall;
  }
};

// Scalar deviation between a local model and the reference global model.
double model_deviation(const ModelParams& local, const ModelParams& global, DiffMetric metric);

// b_c = Diff(w_c, w_g) / sum_c Diff(w_c, w_g); uniform when every
// deviation is zero.
std::vector<double> model_contribution(std::span<const ModelParams> locals, const ModelParams& prev_global,
                                       DiffMetric metric = DiffMetric::l2);

// d_c = sum_y N_cy / N_y, normalised over clients. Classes nobody holds
// are skipped.
std::vector<double> data_contribution(std::span<const ClassHistogram> histograms);

// Client-level share of the pool: (b_c + d_c) proportions of M, boxed into
// [m_min, m_max] by water-filling and rounded by largest remainder. The
// result sums to min(M, C * m_max).
std::vector<std::uint64_t> client_memory_split(const ContributionIndices& indices, std::uint64_t pool,
                                               std::uint64_t m_min, std::uint64_t m_max);

struct ClassSplit {
  ClassQuotas quotas;
  std::uint64_t shortfall = 0;
};

// Class-level split of one client's share m_c. Class scores
// (1-a) N_cy / N_c + a N_cy / N_y are normalised and rounded to m_c by
// largest remainder. With `availability`, no class receives more than the
// client holds; the surplus goes to the remaining classes in proportion to
// their scores and anything still unplaceable is reported as shortfall.
ClassSplit class_memory_split(const ClassHistogram& client_hist, const ClassHistogram& global_hist, double a,
                              std::uint64_t m_c, const std::optional<ClassHistogram>& availability = std::nullopt);

// Equal share per class present at the client, capped by availability.
ClassSplit uniform_class_split(const ClassHistogram& client_hist, std::uint64_t m_c);

// Full server-side allocation for one task boundary. `histograms` describe
// each client's exemplar candidates and double as availability. In
// fixed_equal mode the indices are ignored: every client gets
// clamp(floor(M / C), m_min, m_max) spread evenly over its classes.
MemoryPlan build_memory_plan(std::span<const ModelParams> locals, const ModelParams& prev_global,
                             std::span<const ClassHistogram> histograms, const FederationConfig& config);

// Same, starting from precomputed indices (dynamic mode only).
MemoryPlan build_memory_plan(const ContributionIndices& indices, std::span<const ClassHistogram> histograms,
                             const FederationConfig& config);

}  // namespace fedmra
