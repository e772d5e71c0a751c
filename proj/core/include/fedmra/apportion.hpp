#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedmra {

// Hamilton apportionment: integer counts summing exactly to `total`,
// proportional to non-negative weights. Floors first, then one extra unit
// to each of the largest remainders; ties go to the lower index. All-zero
// weights split as evenly as possible.
std::vector<std::uint64_t> largest_remainder(std::span<const double> weights, std::uint64_t total);

// Largest-remainder rounding of fractional shares that already sum to
// `total`, never leaving [lo[i], hi[i]]. Shares are clamped into their box
// before rounding.
std::vector<std::uint64_t> round_bounded(std::span<const double> shares, std::uint64_t total,
                                         std::span<const std::uint64_t> lo,
                                         std::span<const std::uint64_t> hi);

// Proportional split of `total` with per-item boxes [lo[i], hi[i]]:
// x[i] = clamp(tau * w[i], lo[i], hi[i]) with tau chosen so the x sum to
// total. Solved by iterative water-filling: clamp the side with the larger
// violation, hand the residual to the still-free items in proportion to
// their weights, and repeat until nothing is violated. Free items that all
// have zero weight share the residual equally.
//
// Requires sum(lo) <= total <= sum(hi).
std::vector<double> waterfill(std::span<const double> weights, double total, std::span<const double> lo,
                              std::span<const double> hi);

}  // namespace fedmra
