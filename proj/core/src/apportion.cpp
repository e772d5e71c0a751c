#include "fedmra/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedmra/error.hpp"

namespace fedmra {

namespace {

std::vector<std::size_t> by_remainder_desc(const std::vector<double>& rem) {
  std::vector<std::size_t> order(rem.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  return order;
}

}  // namespace

std::vector<std::uint64_t> largest_remainder(std::span<const double> weights, std::uint64_t total) {
  const std::size_t n = weights.size();
  if (n == 0) {
    if (total != 0) throw ValidationError("largest_remainder: cannot place a positive total in zero bins");
    return {};
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("largest_remainder: weights must be finite and >= 0");
    sum += w;
  }
  std::vector<double> shares(n);
  for (std::size_t i = 0; i < n; ++i) {
    shares[i] = sum > 0.0 ? weights[i] / sum * static_cast<double>(total)
                          : static_cast<double>(total) / static_cast<double>(n);
  }
  std::vector<std::uint64_t> lo(n, 0), hi(n, total);
  return round_bounded(shares, total, lo, hi);
}

std::vector<std::uint64_t> round_bounded(std::span<const double> shares, std::uint64_t total,
                                         std::span<const std::uint64_t> lo, std::span<const std::uint64_t> hi) {
  const std::size_t n = shares.size();
  if (lo.size() != n || hi.size() != n) throw ShapeError("round_bounded: bound vectors must match shares");
  std::uint64_t lo_sum = 0, hi_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) throw ValidationError("round_bounded: lower bound above upper bound at " + std::to_string(i));
    lo_sum += lo[i];
    hi_sum += hi[i];
  }
  if (total < lo_sum || total > hi_sum) {
    throw ValidationError("round_bounded: total " + std::to_string(total) + " outside [" + std::to_string(lo_sum) +
                          ", " + std::to_string(hi_sum) + "]");
  }

  std::vector<std::uint64_t> out(n);
  std::vector<double> rem(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::clamp(shares[i], static_cast<double>(lo[i]), static_cast<double>(hi[i]));
    const double f = std::floor(s);
    out[i] = static_cast<std::uint64_t>(f);
    rem[i] = s - f;
    assigned += out[i];
  }
  const auto order = by_remainder_desc(rem);
  // Floating error in the shares can leave the floors off by more than the
  // remainders cover; keep cycling, respecting the boxes.
  while (assigned < total) {
    for (std::size_t k : order) {
      if (assigned == total) break;
      if (out[k] < hi[k]) {
        ++out[k];
        ++assigned;
      }
    }
  }
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (out[*it] > lo[*it]) {
        --out[*it];
        --assigned;
      }
    }
  }
  return out;
}

std::vector<double> waterfill(std::span<const double> weights, double total, std::span<const double> lo,
                              std::span<const double> hi) {
  const std::size_t n = weights.size();
  if (lo.size() != n || hi.size() != n) throw ShapeError("waterfill: bound vectors must match weights");
  double lo_sum = 0.0, hi_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw ValidationError("waterfill: weights must be finite and >= 0");
    if (lo[i] > hi[i]) throw ValidationError("waterfill: lower bound above upper bound at " + std::to_string(i));
    lo_sum += lo[i];
    hi_sum += hi[i];
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(total));
  if (total < lo_sum - slack || total > hi_sum + slack) {
    throw ValidationError("waterfill: total outside the feasible range");
  }

  std::vector<double> x(n, 0.0);
  std::vector<bool> fixed(n, false);
  for (std::size_t iter = 0; iter <= n; ++iter) {
    double budget = total;
    double w_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) {
        budget -= x[i];
      } else {
        w_free += weights[i];
        ++n_free;
      }
    }
    if (n_free == 0) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      x[i] = w_free > 0.0 ? budget * (weights[i] / w_free) : budget / static_cast<double>(n_free);
    }
    double over = 0.0, under = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      if (x[i] > hi[i]) over += x[i] - hi[i];
      if (x[i] < lo[i]) under += lo[i] - x[i];
    }
    if (over == 0.0 && under == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      if (over >= under && x[i] > hi[i]) {
        x[i] = hi[i];
        fixed[i] = true;
      } else if (over < under && x[i] < lo[i]) {
        x[i] = lo[i];
        fixed[i] = true;
      }
    }
  }
  return x;
}

}  // namespace fedmra
