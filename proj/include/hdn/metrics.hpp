#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hdn/depth_map.hpp"

namespace hdn::metrics {

struct Alignment {
    double scale = 1.0;
    double shift = 0.0;
};

/// Least-squares (s, t) minimizing sum (s * pred + t - gt)^2 over the
/// joint-valid pixels. Throws DegenerateAlignment for fewer than two pixels
/// or a constant prediction.
Alignment align_scale_shift(const DepthMap& pred, const DepthMap& gt);

/// Pixels that enter AbsRel and delta1: joint-valid with gt > 0.
std::size_t metric_pixel_count(const DepthMap& pred, const DepthMap& gt);

/// Mean of |d - d*| / d* over counted pixels.
double absrel(const DepthMap& pred, const DepthMap& gt);

/// Fraction of counted pixels with max(d/d*, d*/d) < 1.25. Nonpositive
/// predictions fail.
double delta1(const DepthMap& pred, const DepthMap& gt);

struct EvalReport {
    double absrel = 0.0;
    double delta1 = 0.0;
    double scale = 1.0;
    double shift = 0.0;
    std::size_t pixels = 0;
    /// Joint-valid pixels left out because gt <= 0.
    std::size_t excluded = 0;
    bool aligned = false;
};

/// Optionally aligns pred to gt, then computes AbsRel and delta1 on the
/// values in the representation they were given.
EvalReport evaluate(const DepthMap& pred, const DepthMap& gt, bool align);

/// Up to n joint-valid (pred, gt) pairs drawn without replacement by a
/// seeded generator, returned in ascending pixel order. n >= M returns all.
std::vector<std::pair<double, double>> scatter_sample(const DepthMap& pred, const DepthMap& gt, std::size_t n,
                                                      std::uint64_t seed);

/// "pred,gt" header plus one pair per line, 9 significant digits.
std::string scatter_csv(const std::vector<std::pair<double, double>>& samples);

}  // namespace hdn::metrics
