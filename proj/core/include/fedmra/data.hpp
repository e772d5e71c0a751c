#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace fedmra {

using ClassId = std::uint32_t;
using SampleUid = std::uint64_t;

struct LabeledSample {
  SampleUid uid = 0;
  std::vector<double> features;
  ClassId label = 0;
  std::uint32_t domain = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

// A validated collection of samples. Construction checks feature
// dimension, finiteness, label range and uid uniqueness.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<LabeledSample> samples, std::size_t num_classes, std::size_t feature_dim);

  // Empty dataset with a declared layout.
  static Dataset empty(std::size_t num_classes, std::size_t feature_dim);

  const std::vector<LabeledSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool is_empty() const { return samples_.empty(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Row-major features of every sample, in sample order.
  std::vector<double> feature_matrix() const;
  std::vector<ClassId> labels() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<LabeledSample> samples_;
  std::size_t num_classes_ = 0;
  std::size_t feature_dim_ = 0;
};

// Concatenate datasets sharing a layout; uids must stay unique.
Dataset concat(const Dataset& a, const Dataset& b);

// Per-class sample counts. Classes with zero count are not stored.
class ClassHistogram {
 public:
  ClassHistogram() = default;
  explicit ClassHistogram(std::map<ClassId, std::uint64_t> counts);

  static ClassHistogram of(const Dataset& ds);
  static ClassHistogram of(std::span<const LabeledSample> samples);

  std::uint64_t count(ClassId y) const;
  std::uint64_t total() const { return total_; }
  const std::map<ClassId, std::uint64_t>& counts() const { return counts_; }

  ClassHistogram& operator+=(const ClassHistogram& other);
  friend ClassHistogram operator+(ClassHistogram a, const ClassHistogram& b) { return a += b; }
  friend bool operator==(const ClassHistogram&, const ClassHistogram&) = default;

 private:
  std::map<ClassId, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace fedmra
