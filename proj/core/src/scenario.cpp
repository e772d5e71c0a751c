#include "fedmra/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "fedmra/apportion.hpp"
#include "fedmra/error.hpp"
#include "fedmra/rng.hpp"

namespace fedmra {

std::size_t TaskStream::num_classes() const {
  std::size_t n = 0;
  for (const auto& t : tasks) {
    for (auto y : t.class_set) n = std::max<std::size_t>(n, y + 1);
  }
  return n;
}

std::vector<double> class_mean(ClassId label, std::size_t feature_dim, double separation) {
  std::vector<double> mean(feature_dim, 0.0);
  const std::size_t axis = label % feature_dim;
  const std::size_t ring = label / feature_dim;
  mean[axis] = separation * static_cast<double>(1 + ring);
  return mean;
}

std::vector<double> domain_shift_vector(std::uint32_t domain_id, std::size_t feature_dim, double shift) {
  const double per_axis = shift * static_cast<double>(domain_id) / std::sqrt(static_cast<double>(feature_dim));
  return std::vector<double>(feature_dim, per_axis);
}

Dataset make_gaussian_dataset(std::span<const ClassId> classes, std::size_t num_classes,
                              std::size_t per_class, std::size_t feature_dim,
                              const std::optional<std::vector<double>>& domain_shift,
                              std::uint64_t seed, const GaussianOptions& opts) {
  if (num_classes < 2) throw ValidationError("make_gaussian_dataset: num_classes must be >= 2");
  if (per_class < 1) throw ValidationError("make_gaussian_dataset: per_class must be >= 1");
  if (feature_dim < 2) throw ValidationError("make_gaussian_dataset: feature_dim must be >= 2");
  if (!(opts.class_separation > 0.0)) {
    throw ValidationError("make_gaussian_dataset: class_separation must be positive");
  }
  if (domain_shift && domain_shift->size() != feature_dim) {
    throw ShapeError("make_gaussian_dataset: domain shift has " + std::to_string(domain_shift->size()) +
                     " entries, expected " + std::to_string(feature_dim));
  }

  std::vector<LabeledSample> samples;
  samples.reserve(classes.size() * per_class);
  SampleUid uid = opts.uid_base;
  for (ClassId y : classes) {
    if (y >= num_classes) {
      throw ValidationError("make_gaussian_dataset: class " + std::to_string(y) + " outside universe of " +
                            std::to_string(num_classes));
    }
    auto mean = class_mean(y, feature_dim, opts.class_separation);
    if (domain_shift) {
      for (std::size_t j = 0; j < feature_dim; ++j) mean[j] += (*domain_shift)[j];
    }
    // One stream per class so adding classes never perturbs the others.
    Rng rng = make_rng(seed, StreamTag::dataset, {y});
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledSample s;
      s.uid = uid++;
      s.label = y;
      s.domain = opts.domain_id;
      s.features.resize(feature_dim);
      for (std::size_t j = 0; j < feature_dim; ++j) s.features[j] = mean[j] + noise(rng);
      samples.push_back(std::move(s));
    }
  }
  return Dataset(std::move(samples), num_classes, feature_dim);
}

Dataset make_gaussian_dataset(std::size_t num_classes, std::size_t per_class, std::size_t feature_dim,
                              const std::optional<std::vector<double>>& domain_shift, std::uint64_t seed,
                              const GaussianOptions& opts) {
  std::vector<ClassId> classes(num_classes);
  std::iota(classes.begin(), classes.end(), ClassId{0});
  return make_gaussian_dataset(classes, num_classes, per_class, feature_dim, domain_shift, seed, opts);
}

namespace {

std::vector<double> sample_dirichlet(std::size_t k, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& v : p) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // Every draw underflowed (tiny alpha): all mass on one client.
    std::fill(p.begin(), p.end(), 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
void shuffle_in_place(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(xs[i - 1], xs[j]);
  }
}

}  // namespace

DirichletSplit dirichlet_split(const Dataset& ds, std::size_t num_clients, double alpha, std::uint64_t seed) {
  if (num_clients < 1) throw ValidationError("dirichlet_partition: num_clients must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("dirichlet_partition: alpha must be > 0");

  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.samples()[i].label].push_back(i);

  DirichletSplit split;
  std::vector<std::vector<LabeledSample>> buckets(num_clients);
  for (auto& [y, idx] : by_class) {
    Rng rng = make_rng(seed, StreamTag::partition, {y});
    auto props = sample_dirichlet(num_clients, alpha, rng);
    auto counts = largest_remainder(props, idx.size());
    shuffle_in_place(idx, rng);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      for (std::uint64_t k = 0; k < counts[c]; ++k) buckets[c].push_back(ds.samples()[idx[pos++]]);
    }
    split.classes.push_back(y);
    split.proportions.push_back(std::move(props));
  }

  // Every client must hold something for the contribution indices to be
  // defined. Move one sample of the most frequent class off the largest
  // client onto each empty one.
  for (std::size_t c = 0; c < num_clients; ++c) {
    if (!buckets[c].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t d = 1; d < num_clients; ++d) {
      if (buckets[d].size() > buckets[donor].size()) donor = d;
    }
    if (buckets[donor].size() < 2) {
      throw ValidationError("dirichlet_partition: " + std::to_string(ds.size()) +
                            " samples cannot cover " + std::to_string(num_clients) + " clients");
    }
    const auto hist = ClassHistogram::of(std::span(buckets[donor]));
    ClassId top = hist.counts().begin()->first;
    for (const auto& [y, n] : hist.counts()) {
      if (n > hist.count(top)) top = y;
    }
    // Take the last sample of that class so the donor's order is otherwise kept.
    auto& src = buckets[donor];
    for (std::size_t i = src.size(); i-- > 0;) {
      if (src[i].label == top) {
        buckets[c].push_back(std::move(src[i]));
        src.erase(src.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
  }

  for (auto& b : buckets) {
    std::sort(b.begin(), b.end(), [](const LabeledSample& a, const LabeledSample& b) { return a.uid < b.uid; });
    split.clients.emplace_back(std::move(b), ds.num_classes(), ds.feature_dim());
  }
  return split;
}

std::vector<Dataset> dirichlet_partition(const Dataset& ds, std::size_t num_clients, double alpha,
                                         std::uint64_t seed) {
  return dirichlet_split(ds, num_clients, alpha, seed).clients;
}

TaskStream build_task_stream(ScenarioKind scenario, std::span<const std::size_t> class_counts,
                             std::size_t num_domains) {
  if (class_counts.empty()) throw ValidationError("build_task_stream: class_counts is empty");
  for (auto n : class_counts) {
    if (n == 0) throw ValidationError("build_task_stream: class counts must be positive");
  }
  if (num_domains == 0) throw ValidationError("build_task_stream: num_domains must be positive");

  TaskStream stream;
  stream.scenario = scenario;
  auto range = [](std::size_t first, std::size_t n) {
    std::vector<ClassId> out(n);
    std::iota(out.begin(), out.end(), static_cast<ClassId>(first));
    return out;
  };

  switch (scenario) {
    case ScenarioKind::fcil: {
      if (num_domains != 1) throw ValidationError("build_task_stream: FCIL requires num_domains = 1");
      std::size_t next = 0;
      for (std::size_t t = 0; t < class_counts.size(); ++t) {
        stream.tasks.push_back({t, range(next, class_counts[t]), 0});
        next += class_counts[t];
      }
      break;
    }
    case ScenarioKind::fdil: {
      if (class_counts.size() != 1) {
        throw ValidationError("build_task_stream: FDIL takes one class_counts entry (the shared universe)");
      }
      for (std::size_t d = 0; d < num_domains; ++d) {
        stream.tasks.push_back({d, range(0, class_counts[0]), static_cast<std::uint32_t>(d)});
      }
      break;
    }
    case ScenarioKind::fcdil: {
      const std::size_t num_tasks = class_counts.size();
      if (num_domains > num_tasks) throw ValidationError("build_task_stream: FCDIL needs a task per domain");
      const std::size_t base = num_tasks / num_domains;
      const std::size_t extra = num_tasks % num_domains;
      std::size_t t = 0;
      for (std::size_t d = 0; d < num_domains; ++d) {
        const std::size_t len = base + (d < extra ? 1 : 0);
        std::size_t next = 0;
        for (std::size_t k = 0; k < len; ++k, ++t) {
          stream.tasks.push_back({t, range(next, class_counts[t]), static_cast<std::uint32_t>(d)});
          next += class_counts[t];
        }
      }
      break;
    }
  }
  validate_task_stream(stream);
  return stream;
}

void validate_task_stream(const TaskStream& stream) {
  if (stream.tasks.empty()) throw ValidationError("task stream has no tasks");
  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const auto& task = stream.tasks[t];
    if (task.task_index != t) throw ValidationError("task " + std::to_string(t) + " carries index " + std::to_string(task.task_index));
    if (task.class_set.empty()) throw ValidationError("task " + std::to_string(t) + " has an empty class set");
    if (!std::is_sorted(task.class_set.begin(), task.class_set.end()) ||
        std::adjacent_find(task.class_set.begin(), task.class_set.end()) != task.class_set.end()) {
      throw ValidationError("task " + std::to_string(t) + " class set must be strictly ascending");
    }
  }
  switch (stream.scenario) {
    case ScenarioKind::fcil: {
      std::set<ClassId> seen;
      for (const auto& task : stream.tasks) {
        if (task.domain_id != 0) throw ValidationError("FCIL tasks must all use domain 0");
        for (auto y : task.class_set) {
          if (!seen.insert(y).second) throw ValidationError("FCIL class " + std::to_string(y) + " appears in two tasks");
        }
      }
      break;
    }
    case ScenarioKind::fdil: {
      std::set<std::uint32_t> domains;
      for (const auto& task : stream.tasks) {
        if (task.class_set != stream.tasks.front().class_set) throw ValidationError("FDIL tasks must share one class set");
        if (!domains.insert(task.domain_id).second) throw ValidationError("FDIL domain ids must be distinct");
      }
      break;
    }
    case ScenarioKind::fcdil: {
      for (std::size_t t = 1; t < stream.tasks.size(); ++t) {
        if (stream.tasks[t].domain_id < stream.tasks[t - 1].domain_id) {
          throw ValidationError("FCDIL domain ids must be nondecreasing");
        }
      }
      break;
    }
  }
}

Scenario build_scenario(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scenario sc;
  sc.stream = build_task_stream(cfg.scenario, cfg.class_counts, cfg.num_domains);
  sc.num_classes = std::max<std::size_t>(sc.stream.num_classes(), 2);
  sc.feature_dim = cfg.feature_dim;

  SampleUid uid_base = 0;
  for (const auto& task : sc.stream.tasks) {
    std::optional<std::vector<double>> shift;
    if (task.domain_id != 0) shift = domain_shift_vector(task.domain_id, cfg.feature_dim, cfg.domain_shift);
    GaussianOptions opts{cfg.class_separation, uid_base, task.domain_id};
    const Dataset full = make_gaussian_dataset(task.class_set, sc.num_classes, cfg.per_class_samples,
                                               cfg.feature_dim, shift,
                                               derive_seed(seed, StreamTag::dataset, {task.task_index}), opts);
    uid_base += full.size();

    std::map<ClassId, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < full.size(); ++i) by_class[full.samples()[i].label].push_back(i);
    std::vector<LabeledSample> train, test;
    Rng rng = make_rng(seed, StreamTag::test_split, {task.task_index});
    for (auto& [y, idx] : by_class) {
      shuffle_in_place(idx, rng);
      auto n_test = static_cast<std::size_t>(std::floor(cfg.test_fraction * static_cast<double>(idx.size()) + 0.5));
      n_test = std::min(n_test, idx.size() - 1);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        (k < n_test ? test : train).push_back(full.samples()[idx[k]]);
      }
    }
    auto by_uid = [](const LabeledSample& a, const LabeledSample& b) { return a.uid < b.uid; };
    std::sort(train.begin(), train.end(), by_uid);
    std::sort(test.begin(), test.end(), by_uid);
    Dataset train_ds(std::move(train), sc.num_classes, cfg.feature_dim);
    sc.test_sets.emplace_back(std::move(test), sc.num_classes, cfg.feature_dim);
    sc.partition.per_task_per_client.push_back(dirichlet_partition(
        train_ds, cfg.fed.num_clients, cfg.dirichlet_alpha,
        derive_seed(seed, StreamTag::partition, {task.task_index})));
  }
  return sc;
}

}  // namespace fedmra
