#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hdn {

inline constexpr double kDefaultEps = 1e-6;

struct ContextStats {
    double median = 0.0;
    /// Mean absolute deviation from the median, before clamping.
    double mad = 0.0;
    std::size_t count = 0;
};

/// Middle element for odd counts, mean of the two middle elements otherwise.
double median(std::span<const double> values);

/// Positions (into `values`) of the element(s) the median is taken from.
/// `lower == upper` for odd counts. Ties are resolved by position.
struct MedianSelection {
    std::size_t lower = 0;
    std::size_t upper = 0;
};
MedianSelection median_selection(std::span<const double> values);

/// (1/n) * sum |v - m|.
double mad(std::span<const double> values, double m);

ContextStats context_stats(std::span<const double> values);

struct NormalizedContext {
    std::vector<double> values;
    ContextStats stats;
};

/// (v - median) / max(mad, eps) for every element.
NormalizedContext normalize_context(std::span<const double> values, double eps = kDefaultEps);

}  // namespace hdn
