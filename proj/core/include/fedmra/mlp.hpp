#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedmra/data.hpp"
#include "fedmra/params.hpp"

namespace fedmra {

// Dense row-major matrix. Rows are samples throughout this module.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix features_of(const Dataset& ds);
Matrix features_of(std::span<const LabeledSample> samples);

// Rectified-linear MLP: feature_dim -> hidden... -> num_classes, identity head.
struct MlpSpec {
  std::size_t feature_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t num_classes = 0;

  std::vector<LayerShape> layer_shapes() const;
  std::size_t param_count() const { return total_size(layer_shapes()); }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// He-uniform weights, zero biases.
ModelParams init_params(const MlpSpec& spec, std::uint64_t seed);

Matrix forward(const ModelParams& params, const MlpSpec& spec, const Matrix& batch);

struct LossValue {
  double value = 0.0;
  Matrix grad;  // d value / d logits
};

// Mean softmax cross-entropy.
LossValue loss_ce(const Matrix& logits, std::span<const ClassId> labels);

// log(1 + ||Z||_F^2) / rows over the whole logit matrix Z.
LossValue loss_mg(const Matrix& logits);

// Mean over rows of KL(softmax(teacher) || softmax(student)); the teacher
// is a constant, so the gradient is with respect to the student only.
LossValue loss_kl(const Matrix& teacher_logits, const Matrix& student_logits);

struct LossBreakdown {
  double ce = 0.0;
  double kl = 0.0;
  double mg = 0.0;
  double total = 0.0;
};

struct BackwardResult {
  LossBreakdown loss;
  ModelParams grad;
};

// total = ce + kl + delta * mg; kl is skipped (reported as 0) when no
// teacher logits are supplied.
BackwardResult backward(const ModelParams& params, const MlpSpec& spec, const Matrix& batch,
                        std::span<const ClassId> labels, const std::optional<Matrix>& teacher_logits,
                        double delta);

// ||grad of single-sample cross-entropy w.r.t. params||^2.
double per_sample_grad_sqnorm(const ModelParams& params, const MlpSpec& spec, const LabeledSample& sample);

// Appends zero-initialised output rows (and biases) for new classes.
// Every existing parameter is kept bit for bit.
std::pair<ModelParams, MlpSpec> expand_head(const ModelParams& params, const MlpSpec& spec,
                                            std::size_t new_num_classes);

namespace detail {

// Allocation-light kernels over raw parameter storage. `grad` is
// overwritten. Shapes are assumed already checked.
LossBreakdown backward_raw(std::span<const double> params, const std::vector<LayerShape>& shapes,
                           const Matrix& batch, std::span<const ClassId> labels,
                           const Matrix* teacher_logits, double delta, std::span<double> grad);

Matrix forward_raw(std::span<const double> params, const std::vector<LayerShape>& shapes,
                   const Matrix& batch);

}  // namespace detail

}  // namespace fedmra
