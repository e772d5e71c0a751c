#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "fedmra/error.hpp"
#include "fedmra/scenario.hpp"

using namespace fedmra;

namespace {

std::vector<double> class_empirical_mean(const Dataset& ds, ClassId y) {
  std::vector<double> m(ds.feature_dim(), 0.0);
  std::size_t n = 0;
  for (const auto& s : ds.samples()) {
    if (s.label != y) continue;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += s.features[i];
    ++n;
  }
  for (auto& v : m) v /= static_cast<double>(n);
  return m;
}

double max_client_share(const DirichletSplit& split) {
  double total = 0.0;
  for (const auto& props : split.proportions) total += *std::max_element(props.begin(), props.end());
  return total / static_cast<double>(split.proportions.size());
}

}  // namespace

TEST_CASE("make_gaussian_dataset counts and determinism") {
  const auto ds = make_gaussian_dataset(2, 10, 4, std::nullopt, 17);
  CHECK(ds.size() == 20);
  const auto h = ClassHistogram::of(ds);
  CHECK(h.count(0) == 10);
  CHECK(h.count(1) == 10);

  const auto again = make_gaussian_dataset(2, 10, 4, std::nullopt, 17);
  CHECK(again.feature_matrix() == ds.feature_matrix());
  CHECK(make_gaussian_dataset(2, 10, 4, std::nullopt, 18).feature_matrix() != ds.feature_matrix());
}

TEST_CASE("make_gaussian_dataset rejects degenerate arguments") {
  CHECK_THROWS_AS(make_gaussian_dataset(1, 10, 4, std::nullopt, 0), ValidationError);
  CHECK_THROWS_AS(make_gaussian_dataset(2, 0, 4, std::nullopt, 0), ValidationError);
  CHECK_THROWS_AS(make_gaussian_dataset(2, 10, 0, std::nullopt, 0), ValidationError);
  CHECK_THROWS_AS(make_gaussian_dataset(2, 10, 4, std::vector<double>(3, 1.0), 0), ShapeError);
  const std::vector<ClassId> outside{0, 5};
  CHECK_THROWS_AS(make_gaussian_dataset(outside, 3, 10, 4, std::nullopt, 0), ValidationError);
}

TEST_CASE("domain shift moves class means within three standard errors") {
  const std::size_t per_class = 1000, dim = 8;
  const std::vector<double> shift{0.5, -1.0, 2.0, 0.0, 0.25, -0.75, 1.5, 3.0};
  const auto plain = make_gaussian_dataset(3, per_class, dim, std::nullopt, 99);
  const auto moved = make_gaussian_dataset(3, per_class, dim, shift, 99);
  // Two independent sample means: the difference has sd sqrt(2 / n).
  const double bound = 3.0 * std::sqrt(2.0 / static_cast<double>(per_class));
  for (ClassId y = 0; y < 3; ++y) {
    const auto a = class_empirical_mean(plain, y);
    const auto b = class_empirical_mean(moved, y);
    for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs((b[i] - a[i]) - shift[i]) <= bound);
  }
}

TEST_CASE("class means and domain shift vector") {
  const auto m = class_mean(5, 4, 2.0);
  CHECK(m == std::vector<double>{0.0, 4.0, 0.0, 0.0});
  const auto s = domain_shift_vector(2, 4, 3.0);
  double norm = 0.0;
  for (double v : s) {
    CHECK(v == doctest::Approx(s[0]));
    norm += v * v;
  }
  CHECK(std::sqrt(norm) == doctest::Approx(6.0));
  for (double v : domain_shift_vector(0, 4, 3.0)) CHECK(v == 0.0);
}

TEST_CASE("dirichlet_partition with one client keeps everything") {
  const auto ds = make_gaussian_dataset(3, 20, 4, std::nullopt, 1);
  const auto parts = dirichlet_partition(ds, 1, 0.5, 7);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].size() == ds.size());
  CHECK(ClassHistogram::of(parts[0]) == ClassHistogram::of(ds));
}

TEST_CASE("dirichlet_partition is a complete, label-preserving partition") {
  const auto ds = make_gaussian_dataset(5, 40, 4, std::nullopt, 2);
  for (double alpha : {0.05, 0.5, 1.0, 10.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto split = dirichlet_split(ds, 6, alpha, seed);
      REQUIRE(split.clients.size() == 6);
      for (const auto& props : split.proportions) {
        double sum = 0.0;
        for (double p : props) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
      std::multiset<SampleUid> uids;
      ClassHistogram merged;
      for (const auto& c : split.clients) {
        CHECK_FALSE(c.is_empty());
        for (const auto& s : c.samples()) uids.insert(s.uid);
        merged += ClassHistogram::of(c);
      }
      std::multiset<SampleUid> expected;
      for (const auto& s : ds.samples()) expected.insert(s.uid);
      CHECK(uids == expected);
      CHECK(merged == ClassHistogram::of(ds));

      const auto again = dirichlet_split(ds, 6, alpha, seed);
      for (std::size_t c = 0; c < 6; ++c) CHECK(again.clients[c] == split.clients[c]);
    }
  }
}

TEST_CASE("smaller alpha concentrates classes on fewer clients") {
  const auto ds = make_gaussian_dataset(4, 50, 4, std::nullopt, 3);
  double skewed = 0.0, flat = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    skewed += max_client_share(dirichlet_split(ds, 5, 0.1, seed));
    flat += max_client_share(dirichlet_split(ds, 5, 100.0, seed));
  }
  CHECK(skewed / 50.0 > flat / 50.0);
}

TEST_CASE("dirichlet_partition argument errors") {
  const auto ds = make_gaussian_dataset(2, 2, 4, std::nullopt, 1);
  CHECK_THROWS_AS(dirichlet_partition(ds, 0, 1.0, 0), ValidationError);
  CHECK_THROWS_AS(dirichlet_partition(ds, 2, 0.0, 0), ValidationError);
  CHECK_THROWS_AS(dirichlet_partition(ds, 5, 1.0, 0), ValidationError);
}

TEST_CASE("build_task_stream FCIL") {
  const std::vector<std::size_t> counts{4, 3, 3, 3};
  const auto s = build_task_stream(ScenarioKind::fcil, counts, 1);
  REQUIRE(s.tasks.size() == 4);
  CHECK(s.tasks[0].class_set == std::vector<ClassId>{0, 1, 2, 3});
  CHECK(s.tasks[1].class_set == std::vector<ClassId>{4, 5, 6});
  CHECK(s.tasks[2].class_set == std::vector<ClassId>{7, 8, 9});
  CHECK(s.tasks[3].class_set == std::vector<ClassId>{10, 11, 12});
  for (const auto& t : s.tasks) CHECK(t.domain_id == 0);
  CHECK(s.num_classes() == 13);
  CHECK_THROWS_AS(build_task_stream(ScenarioKind::fcil, counts, 2), ValidationError);
}

TEST_CASE("build_task_stream FDIL") {
  const std::vector<std::size_t> counts{13};
  const auto s = build_task_stream(ScenarioKind::fdil, counts, 3);
  REQUIRE(s.tasks.size() == 3);
  for (std::uint32_t d = 0; d < 3; ++d) {
    CHECK(s.tasks[d].class_set == s.tasks[0].class_set);
    CHECK(s.tasks[d].domain_id == d);
  }
  CHECK(s.tasks[0].class_set.size() == 13);
  const std::vector<std::size_t> two{4, 3};
  CHECK_THROWS_AS(build_task_stream(ScenarioKind::fdil, two, 2), ValidationError);
}

TEST_CASE("build_task_stream FCDIL") {
  const std::vector<std::size_t> one{5};
  const auto single = build_task_stream(ScenarioKind::fcdil, one, 1);
  REQUIRE(single.tasks.size() == 1);
  CHECK(single.tasks[0].class_set.size() == 5);
  CHECK(single.tasks[0].domain_id == 0);

  const std::vector<std::size_t> counts{2, 2, 3, 2, 2};
  const auto s = build_task_stream(ScenarioKind::fcdil, counts, 2);
  REQUIRE(s.tasks.size() == 5);
  const std::vector<std::uint32_t> domains{0, 0, 0, 1, 1};
  for (std::size_t t = 0; t < 5; ++t) CHECK(s.tasks[t].domain_id == domains[t]);
  CHECK(s.tasks[2].class_set == std::vector<ClassId>{4, 5, 6});
  CHECK(s.tasks[3].class_set == std::vector<ClassId>{0, 1});
  CHECK_THROWS_AS(build_task_stream(ScenarioKind::fcdil, one, 2), ValidationError);
}

TEST_CASE("validate_task_stream catches broken streams") {
  TaskStream overlap{{{0, {0, 1}, 0}, {1, {1, 2}, 0}}, ScenarioKind::fcil};
  CHECK_THROWS_AS(validate_task_stream(overlap), ValidationError);
  TaskStream repeated_domain{{{0, {0, 1}, 0}, {1, {0, 1}, 0}}, ScenarioKind::fdil};
  CHECK_THROWS_AS(validate_task_stream(repeated_domain), ValidationError);
  TaskStream empty_set{{{0, {}, 0}}, ScenarioKind::fcil};
  CHECK_THROWS_AS(validate_task_stream(empty_set), ValidationError);
}

TEST_CASE("build_scenario partitions each task's training split") {
  RunConfig cfg;
  cfg.per_class_samples = 50;
  const auto sc = build_scenario(cfg, 4);
  REQUIRE(sc.partition.per_task_per_client.size() == 4);
  REQUIRE(sc.test_sets.size() == 4);
  std::set<SampleUid> all;
  for (std::size_t t = 0; t < 4; ++t) {
    const auto& task = sc.stream.tasks[t];
    std::size_t train = 0;
    for (const auto& c : sc.partition.per_task_per_client[t]) {
      for (const auto& s : c.samples()) {
        CHECK(std::binary_search(task.class_set.begin(), task.class_set.end(), s.label));
        CHECK(all.insert(s.uid).second);
        ++train;
      }
    }
    for (const auto& s : sc.test_sets[t].samples()) CHECK(all.insert(s.uid).second);
    CHECK(sc.test_sets[t].size() == task.class_set.size() * 10);
    CHECK(train == task.class_set.size() * 40);
  }

  const auto again = build_scenario(cfg, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(again.test_sets[t] == sc.test_sets[t]);
    for (std::size_t c = 0; c < cfg.fed.num_clients; ++c) {
      CHECK(again.partition.per_task_per_client[t][c] == sc.partition.per_task_per_client[t][c]);
    }
  }
}
