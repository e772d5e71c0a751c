#include "fedmra/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedmra/error.hpp"
#include "fedmra/rng.hpp"

namespace fedmra {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix " + std::to_string(r) + "x" + std::to_string(c) + " given " +
                     std::to_string(data.size()) + " values");
  }
}

Matrix features_of(std::span<const LabeledSample> samples) {
  const std::size_t f = samples.empty() ? 0 : samples.front().features.size();
  Matrix m(samples.size(), f);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].features.begin(), samples[i].features.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * f));
  }
  return m;
}

Matrix features_of(const Dataset& ds) {
  Matrix m = features_of(std::span(ds.samples()));
  m.cols = ds.feature_dim();
  return m;
}

std::vector<LayerShape> MlpSpec::layer_shapes() const {
  std::vector<LayerShape> shapes;
  std::size_t in = feature_dim;
  for (auto w : hidden) {
    shapes.push_back({w, in});
    in = w;
  }
  shapes.push_back({num_classes, in});
  return shapes;
}

void MlpSpec::validate() const {
  if (feature_dim == 0) throw ValidationError("MlpSpec: feature_dim must be positive");
  if (hidden.empty()) throw ValidationError("MlpSpec: at least one hidden layer is required");
  for (auto w : hidden) {
    if (w == 0) throw ValidationError("MlpSpec: hidden widths must be positive");
  }
  if (num_classes == 0) throw ValidationError("MlpSpec: num_classes must be positive");
}

ModelParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto shapes = spec.layer_shapes();
  std::vector<double> values;
  values.reserve(total_size(shapes));
  Rng rng = make_rng(seed, StreamTag::init);
  for (const auto& s : shapes) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < s.rows * s.cols; ++i) values.push_back(dist(rng));
    values.insert(values.end(), s.rows, 0.0);
  }
  return ModelParams(std::move(shapes), std::move(values));
}

namespace {

void check_model(const ModelParams& params, const MlpSpec& spec) {
  spec.validate();
  if (params.shapes() != spec.layer_shapes()) {
    throw ShapeError("parameters " + to_string(params.shapes()) + " do not match model " +
                     to_string(spec.layer_shapes()));
  }
}

void check_batch(const Matrix& batch, const MlpSpec& spec) {
  if (batch.cols != spec.feature_dim) {
    throw ShapeError("batch has " + std::to_string(batch.cols) + " columns, model expects " +
                     std::to_string(spec.feature_dim));
  }
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

// out = in * W^T + b
void dense(const Matrix& in, const double* w, const double* b, const LayerShape& s, Matrix& out) {
  out = Matrix(in.rows, s.rows);
  for (std::size_t r = 0; r < in.rows; ++r) {
    const double* x = in.data.data() + r * in.cols;
    double* y = out.data.data() + r * s.rows;
    for (std::size_t o = 0; o < s.rows; ++o) {
      const double* wr = w + o * s.cols;
      double acc = b[o];
      for (std::size_t i = 0; i < s.cols; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }
}

// Per-row log-softmax.
Matrix log_softmax(const Matrix& z) {
  Matrix out(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) {
    double mx = z(r, 0);
    for (std::size_t k = 1; k < z.cols; ++k) mx = std::max(mx, z(r, k));
    double s = 0.0;
    for (std::size_t k = 0; k < z.cols; ++k) s += std::exp(z(r, k) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < z.cols; ++k) out(r, k) = z(r, k) - lse;
  }
  return out;
}

// Forward pass that keeps pre-activations for the backward sweep.
struct Trace {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
};

Matrix forward_trace(std::span<const double> params, const std::vector<LayerShape>& shapes, const Matrix& batch,
                     Trace* trace) {
  Matrix a = batch;
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    const double* w = params.data() + off;
    const double* b = w + s.rows * s.cols;
    off += s.size();
    Matrix z;
    dense(a, w, b, s, z);
    if (trace) {
      trace->inputs.push_back(a);
      trace->pre.push_back(z);
    }
    if (l + 1 < shapes.size()) {
      for (auto& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace

namespace detail {

Matrix forward_raw(std::span<const double> params, const std::vector<LayerShape>& shapes, const Matrix& batch) {
  return forward_trace(params, shapes, batch, nullptr);
}

LossBreakdown backward_raw(std::span<const double> params, const std::vector<LayerShape>& shapes,
                           const Matrix& batch, std::span<const ClassId> labels, const Matrix* teacher_logits,
                           double delta, std::span<double> grad) {
  Trace trace;
  const Matrix logits = forward_trace(params, shapes, batch, &trace);

  LossBreakdown out;
  auto ce = loss_ce(logits, labels);
  out.ce = ce.value;
  Matrix dz = std::move(ce.grad);
  if (teacher_logits) {
    auto kl = loss_kl(*teacher_logits, logits);
    out.kl = kl.value;
    for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += kl.grad.data[i];
  }
  if (delta != 0.0) {
    auto mg = loss_mg(logits);
    out.mg = mg.value;
    for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += delta * mg.grad.data[i];
  } else {
    out.mg = loss_mg(logits).value;
  }
  out.total = out.ce + out.kl + delta * out.mg;

  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<std::size_t> offsets(shapes.size());
  for (std::size_t l = 0, off = 0; l < shapes.size(); ++l) {
    offsets[l] = off;
    off += shapes[l].size();
  }

  for (std::size_t l = shapes.size(); l-- > 0;) {
    const auto& s = shapes[l];
    const Matrix& in = trace.inputs[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + s.rows * s.cols;
    for (std::size_t r = 0; r < dz.rows; ++r) {
      const double* d = dz.data.data() + r * s.rows;
      const double* x = in.data.data() + r * s.cols;
      for (std::size_t o = 0; o < s.rows; ++o) {
        const double g = d[o];
        if (g == 0.0) continue;
        double* gwr = gw + o * s.cols;
        for (std::size_t i = 0; i < s.cols; ++i) gwr[i] += g * x[i];
        gb[o] += g;
      }
    }
    if (l == 0) break;
    // Back through W and the previous layer's rectifier.
    const double* w = params.data() + offsets[l];
    const Matrix& prev_pre = trace.pre[l - 1];
    Matrix da(dz.rows, s.cols);
    for (std::size_t r = 0; r < dz.rows; ++r) {
      const double* d = dz.data.data() + r * s.rows;
      double* out_row = da.data.data() + r * s.cols;
      for (std::size_t o = 0; o < s.rows; ++o) {
        const double g = d[o];
        if (g == 0.0) continue;
        const double* wr = w + o * s.cols;
        for (std::size_t i = 0; i < s.cols; ++i) out_row[i] += g * wr[i];
      }
      for (std::size_t i = 0; i < s.cols; ++i) {
        if (!(prev_pre(r, i) > 0.0)) out_row[i] = 0.0;
      }
    }
    dz = std::move(da);
  }
  return out;
}

}  // namespace detail

Matrix forward(const ModelParams& params, const MlpSpec& spec, const Matrix& batch) {
  check_model(params, spec);
  check_batch(batch, spec);
  return detail::forward_raw(params.values(), params.shapes(), batch);
}

LossValue loss_ce(const Matrix& logits, std::span<const ClassId> labels) {
  if (labels.size() != logits.rows) {
    throw ShapeError("loss_ce: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows) +
                     " rows");
  }
  if (logits.rows == 0) throw ValidationError("loss_ce: empty batch");
  for (auto y : labels) {
    if (y >= logits.cols) {
      throw ValidationError("loss_ce: label " + std::to_string(y) + " outside " + std::to_string(logits.cols) +
                            " classes");
    }
  }
  const Matrix lsm = log_softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  LossValue out{0.0, Matrix(logits.rows, logits.cols)};
  for (std::size_t r = 0; r < logits.rows; ++r) {
    out.value -= lsm(r, labels[r]);
    for (std::size_t k = 0; k < logits.cols; ++k) {
      out.grad(r, k) = (std::exp(lsm(r, k)) - (k == labels[r] ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue loss_mg(const Matrix& logits) {
  if (logits.rows == 0) throw ValidationError("loss_mg: empty batch");
  double sq = 0.0;
  for (double v : logits.data) {
    if (!std::isfinite(v)) throw DivergenceError("loss_mg: non-finite logit");
    sq += v * v;
  }
  const double n = static_cast<double>(logits.rows);
  LossValue out{std::log1p(sq) / n, Matrix(logits.rows, logits.cols)};
  const double scale = 2.0 / (n * (1.0 + sq));
  for (std::size_t i = 0; i < logits.data.size(); ++i) out.grad.data[i] = scale * logits.data[i];
  return out;
}

LossValue loss_kl(const Matrix& teacher_logits, const Matrix& student_logits) {
  check_same_shape(teacher_logits, student_logits, "loss_kl");
  if (student_logits.rows == 0) throw ValidationError("loss_kl: empty batch");
  const Matrix lp = log_softmax(teacher_logits);
  const Matrix ls = log_softmax(student_logits);
  const double inv_n = 1.0 / static_cast<double>(student_logits.rows);
  LossValue out{0.0, Matrix(student_logits.rows, student_logits.cols)};
  for (std::size_t r = 0; r < lp.rows; ++r) {
    for (std::size_t k = 0; k < lp.cols; ++k) {
      const double p = std::exp(lp(r, k));
      out.value += p * (lp(r, k) - ls(r, k));
      out.grad(r, k) = (std::exp(ls(r, k)) - p) * inv_n;
    }
  }
  out.value = std::max(0.0, out.value * inv_n);
  return out;
}

BackwardResult backward(const ModelParams& params, const MlpSpec& spec, const Matrix& batch,
                        std::span<const ClassId> labels, const std::optional<Matrix>& teacher_logits, double delta) {
  check_model(params, spec);
  check_batch(batch, spec);
  if (!(delta >= 0.0)) throw ValidationError("backward: delta must be >= 0");
  if (teacher_logits && (teacher_logits->rows != batch.rows || teacher_logits->cols != spec.num_classes)) {
    throw ShapeError("backward: teacher logits are " + std::to_string(teacher_logits->rows) + "x" +
                     std::to_string(teacher_logits->cols) + ", expected " + std::to_string(batch.rows) + "x" +
                     std::to_string(spec.num_classes));
  }
  std::vector<double> grad(params.size());
  auto loss = detail::backward_raw(params.values(), params.shapes(), batch, labels,
                                   teacher_logits ? &*teacher_logits : nullptr, delta, grad);
  return {loss, ModelParams(params.shapes(), std::move(grad))};
}

double per_sample_grad_sqnorm(const ModelParams& params, const MlpSpec& spec, const LabeledSample& sample) {
  check_model(params, spec);
  if (sample.features.size() != spec.feature_dim) {
    throw ShapeError("sample " + std::to_string(sample.uid) + " has " + std::to_string(sample.features.size()) +
                     " features, model expects " + std::to_string(spec.feature_dim));
  }
  Matrix x(1, spec.feature_dim, sample.features);
  const ClassId label = sample.label;
  std::vector<double> grad(params.size());
  detail::backward_raw(params.values(), params.shapes(), x, std::span(&label, 1), nullptr, 0.0, grad);
  double acc = 0.0;
  for (double g : grad) acc += g * g;
  return acc;
}

std::pair<ModelParams, MlpSpec> expand_head(const ModelParams& params, const MlpSpec& spec,
                                            std::size_t new_num_classes) {
  check_model(params, spec);
  if (new_num_classes < spec.num_classes) {
    throw ValidationError("expand_head: cannot shrink head from " + std::to_string(spec.num_classes) + " to " +
                          std::to_string(new_num_classes) + " classes");
  }
  MlpSpec grown = spec;
  grown.num_classes = new_num_classes;
  if (new_num_classes == spec.num_classes) return {params, grown};

  const auto old_shapes = params.shapes();
  const auto& head = old_shapes.back();
  const std::size_t head_off = params.layer_offset(old_shapes.size() - 1);
  const auto v = params.values();

  std::vector<double> values(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(head_off));
  const std::size_t added = new_num_classes - head.rows;
  // Weights: old rows, then zero rows; biases likewise.
  values.insert(values.end(), v.begin() + static_cast<std::ptrdiff_t>(head_off),
                v.begin() + static_cast<std::ptrdiff_t>(head_off + head.rows * head.cols));
  values.insert(values.end(), added * head.cols, 0.0);
  values.insert(values.end(), v.begin() + static_cast<std::ptrdiff_t>(head_off + head.rows * head.cols), v.end());
  values.insert(values.end(), added, 0.0);

  return {ModelParams(grown.layer_shapes(), std::move(values)), grown};
}

}  // namespace fedmra
