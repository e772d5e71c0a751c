#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedmra/config.hpp"
#include "fedmra/data.hpp"

namespace fedmra {

struct TaskSpec {
  std::size_t task_index = 0;
  std::vector<ClassId> class_set;  // ascending
  std::uint32_t domain_id = 0;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct TaskStream {
  std::vector<TaskSpec> tasks;
  ScenarioKind scenario = ScenarioKind::fcil;

  // Largest class id in any task, plus one.
  std::size_t num_classes() const;

  friend bool operator==(const TaskStream&, const TaskStream&) = default;
};

// Per-task, per-client training data: per_task_per_client[t][c].
struct ClientPartition {
  std::vector<std::vector<Dataset>> per_task_per_client;
};

struct GaussianOptions {
  double class_separation = 3.0;
  SampleUid uid_base = 0;
  std::uint32_t domain_id = 0;
};

// Mean of class `label` before any domain shift. Class k sits on axis
// k mod F at distance separation * (1 + floor(k / F)) from the origin.
std::vector<double> class_mean(ClassId label, std::size_t feature_dim, double separation);

// Unit-covariance Gaussian blobs, per_class samples for each of
// `classes`, labelled within a universe of num_classes. The shift (if any)
// is added to every mean. Samples are ordered by class, then draw.
Dataset make_gaussian_dataset(std::span<const ClassId> classes, std::size_t num_classes,
                              std::size_t per_class, std::size_t feature_dim,
                              const std::optional<std::vector<double>>& domain_shift,
                              std::uint64_t seed, const GaussianOptions& opts = {});

// Convenience form covering classes 0..num_classes-1.
Dataset make_gaussian_dataset(std::size_t num_classes, std::size_t per_class,
                              std::size_t feature_dim,
                              const std::optional<std::vector<double>>& domain_shift,
                              std::uint64_t seed, const GaussianOptions& opts = {});

// Translation applied to every mean in domain `domain_id`: magnitude
// shift * domain_id along the all-ones diagonal.
std::vector<double> domain_shift_vector(std::uint32_t domain_id, std::size_t feature_dim, double shift);

// Label-skew split of ds over clients. Per class, client proportions are
// drawn from Dir(alpha) and turned into counts by largest remainder. A
// client left with nothing receives one sample of the most frequent class
// from the largest client (requires ds.size() >= num_clients).
std::vector<Dataset> dirichlet_partition(const Dataset& ds, std::size_t num_clients, double alpha,
                                         std::uint64_t seed);

// Same as dirichlet_partition but also returns the sampled proportions,
// indexed [class position][client], for inspection in tests.
struct DirichletSplit {
  std::vector<Dataset> clients;
  std::vector<ClassId> classes;
  std::vector<std::vector<double>> proportions;
};
DirichletSplit dirichlet_split(const Dataset& ds, std::size_t num_clients, double alpha,
                               std::uint64_t seed);

// FCIL: one task per class_counts entry, disjoint consecutive class ids,
//       domain 0 throughout (num_domains must be 1).
// FDIL: class_counts holds the single shared universe size; one task per
//       domain, domain ids 0..num_domains-1.
// FCDIL: tasks are split into num_domains contiguous segments of near
//       equal length; class ids restart at 0 in each segment, so later
//       segments revisit old labels under a new domain and may add more.
TaskStream build_task_stream(ScenarioKind scenario, std::span<const std::size_t> class_counts,
                             std::size_t num_domains);

// Throws ValidationError when the stream breaks its scenario's rules.
void validate_task_stream(const TaskStream& stream);

// A fully materialised experiment input.
struct Scenario {
  TaskStream stream;
  ClientPartition partition;
  std::vector<Dataset> test_sets;  // one per task, held out before partitioning
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
};

Scenario build_scenario(const RunConfig& cfg, std::uint64_t seed);

}  // namespace fedmra
