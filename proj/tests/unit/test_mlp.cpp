#include <cmath>
#include <random>

#include "doctest.h"
#include "fedmra/error.hpp"
#include "fedmra/mlp.hpp"
#include "testkit.hpp"

using namespace fedmra;
using testkit::max_rel_error;
using testkit::numeric_gradient;

namespace {

Matrix naive_forward(const ModelParams& p, const MlpSpec& spec, const Matrix& x) {
  const auto shapes = spec.layer_shapes();
  std::vector<std::vector<double>> act;
  for (std::size_t r = 0; r < x.rows; ++r) act.emplace_back(x.row(r).begin(), x.row(r).end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [rows, cols] = std::pair(shapes[l].rows, shapes[l].cols);
    for (auto& a : act) {
      std::vector<double> out(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        double s = p.values()[off + rows * cols + i];
        for (std::size_t j = 0; j < cols; ++j) s += p.values()[off + i * cols + j] * a[j];
        out[i] = (l + 1 < shapes.size() && s < 0.0) ? 0.0 : s;
      }
      a = std::move(out);
    }
    off += shapes[l].size();
  }
  Matrix z(x.rows, spec.num_classes);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t k = 0; k < spec.num_classes; ++k) z(r, k) = act[r][k];
  return z;
}

ModelParams with_values(const ModelParams& p, const std::vector<double>& v) { return ModelParams(p.shapes(), v); }

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("MlpSpec layout and validation") {
  const MlpSpec spec{4, {32, 16}, 3};
  const auto shapes = spec.layer_shapes();
  REQUIRE(shapes.size() == 3);
  CHECK(shapes[0] == LayerShape{32, 4});
  CHECK(shapes[1] == LayerShape{16, 32});
  CHECK(shapes[2] == LayerShape{3, 16});
  CHECK(spec.param_count() == 32 * 5 + 16 * 33 + 3 * 17);
  CHECK_THROWS_AS((MlpSpec{4, {}, 3}.validate()), ValidationError);
  CHECK_THROWS_AS((MlpSpec{4, {0}, 3}.validate()), ValidationError);
  CHECK_THROWS_AS((MlpSpec{0, {4}, 3}.validate()), ValidationError);
}

TEST_CASE("init_params is seeded and has zero biases") {
  const MlpSpec spec{4, {8}, 3};
  const auto a = init_params(spec, 1);
  CHECK(a == init_params(spec, 1));
  CHECK_FALSE(a == init_params(spec, 2));
  for (std::size_t i = 8 * 4; i < 8 * 5; ++i) CHECK(a.values()[i] == 0.0);
}

TEST_CASE("forward") {
  std::mt19937_64 rng(1);
  SUBCASE("zero parameters give zero logits") {
    const MlpSpec spec{3, {5}, 4};
    const auto z = forward(ModelParams::zeros(spec.layer_shapes()), spec, testkit::random_matrix(6, 3, rng));
    for (double v : z.data) CHECK(v == 0.0);
  }
  SUBCASE("identity weights pass non-negative inputs through") {
    const MlpSpec spec{2, {2}, 2};
    const ModelParams p(spec.layer_shapes(), {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0});
    const Matrix x(2, 2, {0.5, 2.0, 3.0, 0.0});
    CHECK(forward(p, spec, x) == x);
  }
  SUBCASE("matches a naive loop") {
    const MlpSpec spec{5, {7, 6}, 4};
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = testkit::random_params(spec, rng);
      const auto x = testkit::random_matrix(9, 5, rng);
      const auto z = forward(p, spec, x);
      const auto ref = naive_forward(p, spec, x);
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        CHECK(std::abs(z.data[i] - ref.data[i]) <= 1e-12 * std::max(1.0, std::abs(ref.data[i])));
      }
    }
  }
  SUBCASE("shape mismatches are errors") {
    const MlpSpec spec{3, {5}, 4};
    const auto p = init_params(spec, 0);
    CHECK_THROWS_AS(forward(p, spec, Matrix(2, 4)), ShapeError);
    CHECK_THROWS_AS(forward(p, MlpSpec{3, {6}, 4}, Matrix(2, 3)), ShapeError);
  }
}

TEST_CASE("loss_ce") {
  const Matrix flat(3, 5);
  const std::vector<ClassId> y{0, 3, 4};
  CHECK(loss_ce(flat, y).value == doctest::Approx(std::log(5.0)).epsilon(1e-14));

  Matrix sharp(3, 5);
  for (std::size_t r = 0; r < 3; ++r) sharp(r, y[r]) = 50.0;
  CHECK(loss_ce(sharp, y).value < 1e-6);

  CHECK_THROWS_AS(loss_ce(flat, std::vector<ClassId>{0, 1}), ShapeError);
  CHECK_THROWS_AS(loss_ce(flat, std::vector<ClassId>{0, 1, 5}), ValidationError);
}

TEST_CASE("loss_mg") {
  CHECK(loss_mg(Matrix(4, 3)).value == 0.0);
  const Matrix unit(1, 3, {0.6, 0.0, 0.8});
  CHECK(loss_mg(unit).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  std::mt19937_64 rng(2);
  const auto z = testkit::random_matrix(4, 3, rng);
  double prev = -1.0;
  for (double s : {0.5, 1.0, 2.0}) {
    Matrix scaled = z;
    for (auto& v : scaled.data) v *= s;
    const double val = loss_mg(scaled).value;
    CHECK(val >= prev);
    prev = val;
  }
}

TEST_CASE("loss_kl") {
  std::mt19937_64 rng(3);
  const auto z = testkit::random_matrix(5, 4, rng);
  CHECK(loss_kl(z, z).value == doctest::Approx(0.0));
  Matrix shifted = z;
  for (auto& v : shifted.data) v += 7.0;
  CHECK(loss_kl(z, shifted).value == doctest::Approx(0.0).epsilon(1e-12));

  const Matrix teacher(1, 4);
  const Matrix student(1, 4, {1.0, 0.0, 0.0, 0.0});
  CHECK(loss_kl(teacher, student).value == doctest::Approx(0.107374019508788537).epsilon(1e-12));

  for (int trial = 0; trial < 50; ++trial) {
    const auto t = testkit::random_matrix(3, 4, rng, 2.0);
    const auto s = testkit::random_matrix(3, 4, rng, 2.0);
    CHECK(loss_kl(t, s).value > 0.0);
  }
  CHECK_THROWS_AS(loss_kl(Matrix(2, 3), Matrix(2, 4)), ShapeError);
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = testkit::random_matrix(6, 3, rng, 2.0);
    const auto t = testkit::random_matrix(6, 3, rng, 2.0);
    const auto y = testkit::random_labels(6, 3, rng);
    auto as_matrix = [&](const std::vector<double>& v) { return Matrix(6, 3, v); };

    const auto ce_fd = numeric_gradient([&](const auto& v) { return loss_ce(as_matrix(v), y).value; }, z.data);
    CHECK(max_rel_error(loss_ce(z, y).grad.data, ce_fd) <= 1e-4);

    const auto mg_fd = numeric_gradient([&](const auto& v) { return loss_mg(as_matrix(v)).value; }, z.data);
    CHECK(max_rel_error(loss_mg(z).grad.data, mg_fd) <= 1e-4);

    const auto kl_fd = numeric_gradient([&](const auto& v) { return loss_kl(t, as_matrix(v)).value; }, z.data);
    CHECK(max_rel_error(loss_kl(t, z).grad.data, kl_fd) <= 1e-4);
  }
}

TEST_CASE("backward") {
  std::mt19937_64 rng(5);
  const auto& spec = testkit::small_net();

  SUBCASE("no teacher and delta 0 is plain cross-entropy") {
    const auto p = testkit::random_params(spec, rng);
    const auto x = testkit::random_matrix(8, 2, rng);
    const auto y = testkit::random_labels(8, 3, rng);
    const auto r = backward(p, spec, x, y, std::nullopt, 0.0);
    CHECK(r.loss.kl == 0.0);
    CHECK(r.loss.total == r.loss.ce);
    CHECK(r.loss.ce == doctest::Approx(loss_ce(forward(p, spec, x), y).value).epsilon(1e-14));
    const auto fd = numeric_gradient(
        [&](const auto& v) { return loss_ce(forward(with_values(p, v), spec, x), y).value; }, to_vec(p.values()));
    CHECK(max_rel_error(to_vec(r.grad.values()), fd) <= 1e-4);
  }

  SUBCASE("teacher equal to the student contributes nothing") {
    const auto p = testkit::random_params(spec, rng);
    const auto x = testkit::random_matrix(8, 2, rng);
    const auto y = testkit::random_labels(8, 3, rng);
    const auto r = backward(p, spec, x, y, forward(p, spec, x), 0.3);
    CHECK(std::abs(r.loss.kl) <= 1e-15);
    CHECK(r.loss.total == doctest::Approx(r.loss.ce + 0.3 * r.loss.mg).epsilon(1e-12));
  }

  SUBCASE("combined objective gradient over every parameter") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = testkit::random_params(spec, rng);
      const auto x = testkit::random_matrix(7, 2, rng);
      const auto y = testkit::random_labels(7, 3, rng);
      const auto teacher = forward(testkit::random_params(spec, rng), spec, x);
      const auto r = backward(p, spec, x, y, teacher, 0.1);
      CHECK(testkit::rel_diff(r.loss.total, r.loss.ce + r.loss.kl + 0.1 * r.loss.mg) <= 1e-12);
      const auto fd = numeric_gradient(
          [&](const auto& v) { return backward(with_values(p, v), spec, x, y, teacher, 0.1).loss.total; },
          to_vec(p.values()));
      CHECK(max_rel_error(to_vec(r.grad.values()), fd) <= 1e-4);
    }
  }
}

TEST_CASE("per_sample_grad_sqnorm") {
  std::mt19937_64 rng(6);
  const auto& spec = testkit::small_net();
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = testkit::random_params(spec, rng);
    const LabeledSample s{0, testkit::random_vector(2, rng), testkit::random_labels(1, 3, rng)[0], 0};
    const Matrix x(1, 2, s.features);
    const std::vector<ClassId> y{s.label};
    const auto fd = numeric_gradient(
        [&](const auto& v) { return loss_ce(forward(with_values(p, v), spec, x), y).value; }, to_vec(p.values()));
    double sq = 0.0;
    for (double g : fd) sq += g * g;
    CHECK(testkit::rel_diff(per_sample_grad_sqnorm(p, spec, s), sq) <= 1e-3);
  }

  const MlpSpec tiny{2, {2}, 2};
  const ModelParams saturated(tiny.layer_shapes(), {1, 0, 0, 1, 0, 0, 50, 0, 0, 50, 0, 0});
  CHECK(per_sample_grad_sqnorm(saturated, tiny, LabeledSample{0, {1.0, 0.0}, 0, 0}) <= 1e-6);
}

TEST_CASE("expand_head") {
  std::mt19937_64 rng(7);
  const MlpSpec spec{4, {6}, 3};
  const auto p = testkit::random_params(spec, rng);

  const auto [same, same_spec] = expand_head(p, spec, 3);
  CHECK(same == p);
  CHECK(same_spec == spec);

  const auto [grown, grown_spec] = expand_head(p, spec, 5);
  CHECK(grown_spec.num_classes == 5);
  CHECK(grown.shapes() == grown_spec.layer_shapes());
  const auto x = testkit::random_matrix(10, 4, rng);
  const auto before = forward(p, spec, x);
  const auto after = forward(grown, grown_spec, x);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(after(r, k) == before(r, k));
    for (std::size_t k = 3; k < 5; ++k) CHECK(after(r, k) == 0.0);
  }
  CHECK_THROWS_AS(expand_head(p, spec, 2), ValidationError);
}
