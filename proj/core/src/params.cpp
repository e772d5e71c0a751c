#include "fedmra/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fedmra/error.hpp"

namespace fedmra {

std::string to_string(std::span<const LayerShape> shapes) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i) os << ", ";
    os << shapes[i].rows << 'x' << shapes[i].cols << "+b" << shapes[i].rows;
  }
  os << ']';
  return os.str();
}

std::size_t total_size(std::span<const LayerShape> shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.size();
  return n;
}

ModelParams::ModelParams(std::vector<LayerShape> shapes, std::vector<double> values)
    : shapes_(std::move(shapes)), values_(std::move(values)) {
  const std::size_t expected = total_size(shapes_);
  if (expected != values_.size()) {
    std::ostringstream os;
    os << "parameter vector has " << values_.size() << " entries but layout "
       << to_string(shapes_) << " needs " << expected;
    throw ShapeError(os.str());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("non-finite parameter at index " + std::to_string(i));
    }
  }
}

ModelParams ModelParams::zeros(std::vector<LayerShape> shapes) {
  const std::size_t n = total_size(shapes);
  return ModelParams(std::move(shapes), std::vector<double>(n, 0.0));
}

std::size_t ModelParams::layer_offset(std::size_t i) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < i && k < shapes_.size(); ++k) off += shapes_[k].size();
  return off;
}

namespace {

void require_same_layout(const ModelParams& x, const ModelParams& y) {
  if (!x.same_layout(y)) {
    throw ShapeError("parameter layout mismatch: " + to_string(x.shapes()) + " vs " +
                     to_string(y.shapes()));
  }
}

}  // namespace

ModelParams param_axpy(double alpha, const ModelParams& x, const ModelParams& y) {
  require_same_layout(x, y);
  std::vector<double> out(y.values().begin(), y.values().end());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * xv[i];
  return ModelParams(y.shapes(), std::move(out));
}

ModelParams param_sub(const ModelParams& x, const ModelParams& y) { return param_axpy(-1.0, y, x); }

ModelParams param_scale(double alpha, const ModelParams& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= alpha;
  return ModelParams(x.shapes(), std::move(out));
}

double param_l2_norm(const ModelParams& x) {
  const auto v = x.values();
  double scale = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError("non-finite parameter at index " + std::to_string(i));
    }
    scale = std::max(scale, std::abs(v[i]));
  }
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (double e : v) {
    const double r = e / scale;
    acc += r * r;
  }
  return scale * std::sqrt(acc);
}

double param_dot(const ModelParams& x, const ModelParams& y) {
  require_same_layout(x, y);
  const auto a = x.values();
  const auto b = y.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace fedmra
