#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fedmra {

// One dense layer: a rows x cols weight matrix (row-major) followed by a
// bias of length rows.
struct LayerShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols + rows; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

std::string to_string(std::span<const LayerShape> shapes);

// Flat parameter vector plus the layer layout it encodes. Layers are
// stored back to back: W_0, b_0, W_1, b_1, ...
//
// Immutable after construction; arithmetic returns new objects.
class ModelParams {
 public:
  ModelParams() = default;

  // Throws ShapeError when values.size() disagrees with the shapes and
  // ValidationError when any entry is non-finite.
  ModelParams(std::vector<LayerShape> shapes, std::vector<double> values);

  static ModelParams zeros(std::vector<LayerShape> shapes);

  std::span<const double> values() const { return values_; }
  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Offset of layer `i`'s weight block inside values().
  std::size_t layer_offset(std::size_t i) const;

  bool same_layout(const ModelParams& other) const { return shapes_ == other.shapes_; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<LayerShape> shapes_;
  std::vector<double> values_;
};

std::size_t total_size(std::span<const LayerShape> shapes);

// y + alpha * x. Throws ShapeError naming both layouts on mismatch.
ModelParams param_axpy(double alpha, const ModelParams& x, const ModelParams& y);

// x - y, a convenience over param_axpy.
ModelParams param_sub(const ModelParams& x, const ModelParams& y);

ModelParams param_scale(double alpha, const ModelParams& x);

// Euclidean norm with a fixed left-to-right reduction. Throws
// ValidationError naming the first non-finite index.
double param_l2_norm(const ModelParams& x);

double param_dot(const ModelParams& x, const ModelParams& y);

}  // namespace fedmra
