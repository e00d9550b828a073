#include "hdn/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdn/error.hpp"

namespace hdn {

namespace {

void require_non_empty(std::span<const double> values, const char* what) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, std::string(what) + " of an empty list");
}

}  // namespace

MedianSelection median_selection(std::span<const double> values) {
    require_non_empty(values, "median");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = values.size();
    auto by_value = [&values](std::size_t a, std::size_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    };
    const std::size_t upper_rank = n / 2;
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(upper_rank), order.end(), by_value);
    MedianSelection sel;
    sel.upper = order[upper_rank];
    if (n % 2 == 1) {
        sel.lower = sel.upper;
    } else {
        // Everything before upper_rank is <= the upper element; the lower middle
        // is the largest of them.
        sel.lower = *std::max_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(upper_rank), by_value);
    }
    return sel;
}

double median(std::span<const double> values) {
    const MedianSelection sel = median_selection(values);
    if (sel.lower == sel.upper) return values[sel.upper];
    return 0.5 * (values[sel.lower] + values[sel.upper]);
}

double mad(std::span<const double> values, double m) {
    require_non_empty(values, "mean absolute deviation");
    double sum = 0.0;
    for (double v : values) sum += std::abs(v - m);
    return sum / static_cast<double>(values.size());
}

ContextStats context_stats(std::span<const double> values) {
    ContextStats stats;
    stats.median = median(values);
    stats.mad = mad(values, stats.median);
    stats.count = values.size();
    return stats;
}

NormalizedContext normalize_context(std::span<const double> values, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorKind::Parameter, "eps must be positive");
    NormalizedContext out;
    out.stats = context_stats(values);
    const double scale = std::max(out.stats.mad, eps);
    out.values.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        out.values[k] = (values[k] - out.stats.median) / scale;
    }
    return out;
}

}  // namespace hdn
