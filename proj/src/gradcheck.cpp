#include "hdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hdn/error.hpp"

namespace hdn {

GradCheckResult check_gradient(const LossFunction& loss, const DepthMap& pred, const Mask& skip, double step,
                               double tolerance) {
    if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorKind::Parameter, "finite-difference step must be positive");
    if (!(tolerance > 0.0)) throw Error(ErrorKind::Parameter, "tolerance must be positive");
    if (skip.size() != pred.size()) throw Error(ErrorKind::Shape, "skip mask does not match the prediction");

    const LossReport base = loss(pred);
    if (!base.gradient) throw Error(ErrorKind::Parameter, "loss did not produce a gradient");
    const std::vector<double>& g = *base.gradient;

    GradCheckResult result;
    double max_abs = 0.0;
    double sq = 0.0;
    for (double v : g) {
        max_abs = std::max(max_abs, std::abs(v));
        sq += v * v;
    }
    result.gradient_norm = std::sqrt(sq);
    // Round-off in the central difference is about 1e-16 |L| / step; the
    // absolute part keeps an exactly flat loss from reading as a mismatch.
    const double floor = std::max(1e-3 * max_abs, 1e-6 * std::max(1.0, std::abs(base.value)));

    std::vector<double> values(pred.values().begin(), pred.values().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!pred.is_valid(i)) continue;
        if (skip[i] != 0) {
            ++result.skipped;
            continue;
        }
        const double original = values[i];
        values[i] = original + step;
        const double up = loss(pred.with_values(values)).value;
        values[i] = original - step;
        const double down = loss(pred.with_values(values)).value;
        values[i] = original;

        const double fd = (up - down) / (2.0 * step);
        const double err = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), floor});
        result.max_rel_error = std::max(result.max_rel_error, err);
        ++result.checked;
    }
    result.pass = result.checked > 0 && result.max_rel_error < tolerance;
    return result;
}

}  // namespace hdn
