#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "doctest.h"
#include "fedmra/data.hpp"
#include "fedmra/error.hpp"
#include "fedmra/params.hpp"
#include "testkit.hpp"

using namespace fedmra;

namespace {

ModelParams flat(std::vector<double> v) {
  const std::size_t n = v.size();
  return ModelParams({LayerShape{n, 0}}, std::move(v));
}

// Neumaier-compensated sum of squares, independent of the library's reduction.
double compensated_norm(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double term = x * x;
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return std::sqrt(sum + comp);
}

}  // namespace

TEST_CASE("ModelParams rejects bad layouts and non-finite values") {
  CHECK_THROWS_AS(ModelParams({LayerShape{2, 2}}, std::vector<double>(5)), ShapeError);
  CHECK_NOTHROW(ModelParams({LayerShape{2, 2}}, std::vector<double>(6)));
  CHECK_THROWS_AS(flat({1.0, std::numeric_limits<double>::quiet_NaN()}), ValidationError);
  CHECK_THROWS_AS(flat({std::numeric_limits<double>::infinity()}), ValidationError);

  const ModelParams p({LayerShape{2, 3}, LayerShape{4, 2}}, std::vector<double>(8 + 12));
  CHECK(p.layer_offset(0) == 0);
  CHECK(p.layer_offset(1) == 8);
}

TEST_CASE("param_axpy") {
  SUBCASE("alpha 0 keeps y") {
    const auto y = flat({3.0, -1.5, 7.25});
    CHECK(param_axpy(0.0, flat({9.0, 9.0, 9.0}), y) == y);
  }
  SUBCASE("x = -y with alpha 1 gives zeros") {
    const auto r = param_axpy(1.0, flat({-1.0, 2.0, -3.5}), flat({1.0, -2.0, 3.5}));
    for (double v : r.values()) CHECK(v == 0.0);
  }
  SUBCASE("direct arithmetic") {
    const auto r = param_axpy(2.0, flat({1.0, 2.0}), flat({3.0, 4.0}));
    CHECK(r.values()[0] == 5.0);
    CHECK(r.values()[1] == 8.0);
  }
  SUBCASE("shape mismatch names both layouts") {
    const ModelParams a({LayerShape{1, 1}}, {1.0, 2.0});
    const ModelParams b({LayerShape{2, 0}}, {1.0, 2.0});
    try {
      (void)param_axpy(1.0, a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(to_string(a.shapes())) != std::string::npos);
      CHECK(msg.find(to_string(b.shapes())) != std::string::npos);
    }
  }
}

TEST_CASE("param_axpy is linear in alpha") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ud(-1e3, 1e3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xv(40), yv(40);
    for (auto& v : xv) v = ud(rng);
    for (auto& v : yv) v = ud(rng);
    const double a = ud(rng) / 1e3, b = ud(rng) / 1e3;
    const auto x = flat(xv), y = flat(yv);
    const auto lhs = param_axpy(a + b, x, y);
    const auto rhs = param_axpy(a, x, param_axpy(b, x, y));
    for (std::size_t i = 0; i < 40; ++i) {
      const double scale = std::max({std::abs(lhs.values()[i]), std::abs(xv[i]), std::abs(yv[i])});
      CHECK(std::abs(lhs.values()[i] - rhs.values()[i]) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("param_l2_norm") {
  CHECK(param_l2_norm(flat({0.0, 0.0, 0.0})) == 0.0);
  CHECK(param_l2_norm(flat({3.0, 4.0})) == 5.0);
  CHECK(param_l2_norm(flat({0.0, 1e-300})) > 0.0);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = testkit::random_vector(100, rng, 10.0);
    CHECK(testkit::rel_diff(param_l2_norm(flat(v)), compensated_norm(v)) <= 1e-12);
  }
}

TEST_CASE("non-finite entries are reported by index") {
  auto message_of = [](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message_of([] { (void)flat({1.0, std::nan(""), std::nan("")}); }).find("index 1") != std::string::npos);
  const auto big = flat({1.0, 1e308, 1e308});
  CHECK(message_of([&] { (void)param_axpy(1.0, big, big); }).find("index 1") != std::string::npos);
}

TEST_CASE("param_dot and param_scale") {
  CHECK(param_dot(flat({1.0, 2.0, 3.0}), flat({4.0, 5.0, 6.0})) == 32.0);
  const auto s = param_scale(-2.0, flat({1.5, 0.0}));
  CHECK(s.values()[0] == -3.0);
  CHECK(s.values()[1] == 0.0);
}

TEST_CASE("Dataset validation") {
  auto sample = [](SampleUid uid, std::vector<double> f, ClassId y) { return LabeledSample{uid, std::move(f), y, 0}; };
  CHECK_NOTHROW(Dataset({sample(0, {1.0, 2.0}, 0), sample(1, {0.0, 0.5}, 2)}, 3, 2));
  CHECK_THROWS_AS(Dataset({sample(0, {1.0}, 0)}, 3, 2), ValidationError);
  CHECK_THROWS_AS(Dataset({sample(0, {1.0, 2.0}, 3)}, 3, 2), ValidationError);
  CHECK_THROWS_AS(Dataset({sample(4, {1.0, 2.0}, 0), sample(4, {1.0, 2.0}, 1)}, 3, 2), ValidationError);
  CHECK_THROWS_AS(Dataset({sample(0, {1.0, std::nan("")}, 0)}, 3, 2), ValidationError);

  const Dataset a({sample(0, {1.0, 2.0}, 0)}, 3, 2);
  const Dataset b({sample(1, {3.0, 4.0}, 1)}, 3, 2);
  const auto ab = concat(a, b);
  CHECK(ab.size() == 2);
  CHECK(ab.feature_matrix() == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(ab.labels() == std::vector<ClassId>{0, 1});
  CHECK_THROWS_AS(concat(a, a), ValidationError);
}

TEST_CASE("ClassHistogram matches a brute-force recount") {
  std::mt19937_64 rng(3);
  const auto labels = testkit::random_labels(500, 7, rng);
  std::vector<LabeledSample> samples;
  for (std::size_t i = 0; i < labels.size(); ++i) samples.push_back({i, {0.0}, labels[i], 0});
  const Dataset ds(samples, 7, 1);
  const auto h = ClassHistogram::of(ds);

  std::map<ClassId, std::uint64_t> recount;
  for (const auto& s : samples) ++recount[s.label];
  CHECK(h.total() == 500);
  for (ClassId y = 0; y < 7; ++y) CHECK(h.count(y) == recount[y]);

  auto twice = h;
  twice += h;
  CHECK(twice.total() == 1000);
  CHECK(twice.count(2) == 2 * recount[2]);
  CHECK(ClassHistogram({{1, 0}, {2, 3}}).counts().size() == 1);
}
