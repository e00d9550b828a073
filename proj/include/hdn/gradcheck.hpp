#pragma once

#include <cstddef>
#include <functional>

#include "hdn/depth_map.hpp"
#include "hdn/loss.hpp"

namespace hdn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    /// Euclidean norm of the analytical gradient.
    double gradient_norm = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    bool pass = false;
};

using LossFunction = std::function<LossReport(const DepthMap&)>;

/// Compares the analytical gradient of `loss` at `pred` with central finite
/// differences of the given step at every valid pixel not flagged in `skip`.
///
/// The per-pixel relative error is |g - fd| / max(|g|, |fd|, floor) with
/// floor = max(1e-3 * max|g|, 1e-6 * max(1, |L|)), so near-zero entries and
/// exactly flat losses do not dominate. A check with every
/// pixel skipped does not pass.
GradCheckResult check_gradient(const LossFunction& loss, const DepthMap& pred, const Mask& skip, double step,
                               double tolerance);

}  // namespace hdn
