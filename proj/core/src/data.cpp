#include "fedmra/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "fedmra/error.hpp"

namespace fedmra {

Dataset::Dataset(std::vector<LabeledSample> samples, std::size_t num_classes,
                 std::size_t feature_dim)
    : samples_(std::move(samples)), num_classes_(num_classes), feature_dim_(feature_dim) {
  if (num_classes_ == 0) throw ValidationError("dataset needs at least one class");
  if (feature_dim_ == 0) throw ValidationError("dataset feature_dim must be positive");
  std::unordered_set<SampleUid> seen;
  seen.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (s.features.size() != feature_dim_) {
      throw ShapeError("sample " + std::to_string(s.uid) + " has " +
                       std::to_string(s.features.size()) + " features, expected " +
                       std::to_string(feature_dim_));
    }
    for (double f : s.features) {
      if (!std::isfinite(f)) {
        throw ValidationError("sample " + std::to_string(s.uid) + " has a non-finite feature");
      }
    }
    if (s.label >= num_classes_) {
      throw ValidationError("sample " + std::to_string(s.uid) + " has label " +
                            std::to_string(s.label) + " outside " +
                            std::to_string(num_classes_) + " classes");
    }
    if (!seen.insert(s.uid).second) {
      throw ValidationError("duplicate sample uid " + std::to_string(s.uid));
    }
  }
}

Dataset Dataset::empty(std::size_t num_classes, std::size_t feature_dim) {
  return Dataset({}, num_classes, feature_dim);
}

std::vector<double> Dataset::feature_matrix() const {
  std::vector<double> out;
  out.reserve(samples_.size() * feature_dim_);
  for (const auto& s : samples_) out.insert(out.end(), s.features.begin(), s.features.end());
  return out;
}

std::vector<ClassId> Dataset::labels() const {
  std::vector<ClassId> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.feature_dim() != b.feature_dim()) {
    throw ShapeError("cannot concatenate datasets with feature_dim " +
                     std::to_string(a.feature_dim()) + " and " + std::to_string(b.feature_dim()));
  }
  std::vector<LabeledSample> all = a.samples();
  all.insert(all.end(), b.samples().begin(), b.samples().end());
  return Dataset(std::move(all), std::max(a.num_classes(), b.num_classes()), a.feature_dim());
}

ClassHistogram::ClassHistogram(std::map<ClassId, std::uint64_t> counts) {
  for (const auto& [y, n] : counts) {
    if (n == 0) continue;
    counts_[y] = n;
    total_ += n;
  }
}

ClassHistogram ClassHistogram::of(std::span<const LabeledSample> samples) {
  std::map<ClassId, std::uint64_t> counts;
  for (const auto& s : samples) ++counts[s.label];
  return ClassHistogram(std::move(counts));
}

ClassHistogram ClassHistogram::of(const Dataset& ds) { return of(std::span(ds.samples())); }

std::uint64_t ClassHistogram::count(ClassId y) const {
  auto it = counts_.find(y);
  return it == counts_.end() ? 0 : it->second;
}

ClassHistogram& ClassHistogram::operator+=(const ClassHistogram& other) {
  for (const auto& [y, n] : other.counts_) counts_[y] += n;
  total_ += other.total_;
  return *this;
}

}  // namespace fedmra
