#include "hdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "hdn/error.hpp"
#include "hdn/random.hpp"

namespace hdn::metrics {

namespace {

template <typename F>
void for_counted(const DepthMap& pred, const DepthMap& gt, F&& f) {
    const Mask joint = joint_mask(pred, gt);
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] != 0 && gt[i] > 0.0) f(pred[i], gt[i]);
    }
}

}  // namespace

Alignment align_scale_shift(const DepthMap& pred, const DepthMap& gt) {
    const Mask joint = joint_mask(pred, gt);
    std::size_t n = 0;
    double mean_p = 0.0;
    double mean_g = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] == 0) continue;
        ++n;
        mean_p += pred[i];
        mean_g += gt[i];
    }
    if (n < 2) {
        throw Error(ErrorKind::DegenerateAlignment,
                    "need at least 2 joint-valid pixels, have " + std::to_string(n));
    }
    mean_p /= static_cast<double>(n);
    mean_g /= static_cast<double>(n);

    // Centered normal equations; the 2x2 system reduces to cov / var.
    double var = 0.0;
    double cov = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] == 0) continue;
        const double dp = pred[i] - mean_p;
        var += dp * dp;
        cov += dp * (gt[i] - mean_g);
        spread = std::max(spread, std::abs(pred[i]));
    }
    if (!(var > 1e-24 * static_cast<double>(n) * std::max(spread * spread, 1e-300))) {
        throw Error(ErrorKind::DegenerateAlignment, "prediction is constant over the joint mask");
    }
    Alignment a;
    a.scale = cov / var;
    a.shift = mean_g - a.scale * mean_p;
    return a;
}

std::size_t metric_pixel_count(const DepthMap& pred, const DepthMap& gt) {
    std::size_t n = 0;
    for_counted(pred, gt, [&n](double, double) { ++n; });
    return n;
}

double absrel(const DepthMap& pred, const DepthMap& gt) {
    std::size_t n = 0;
    double sum = 0.0;
    for_counted(pred, gt, [&](double d, double d_star) {
        ++n;
        sum += std::abs(d - d_star) / d_star;
    });
    if (n == 0) throw Error(ErrorKind::EmptyInput, "no joint-valid pixels with positive ground truth");
    return sum / static_cast<double>(n);
}

double delta1(const DepthMap& pred, const DepthMap& gt) {
    std::size_t n = 0;
    std::size_t hits = 0;
    for_counted(pred, gt, [&](double d, double d_star) {
        ++n;
        if (d > 0.0 && std::max(d / d_star, d_star / d) < 1.25) ++hits;
    });
    if (n == 0) throw Error(ErrorKind::EmptyInput, "no joint-valid pixels with positive ground truth");
    return static_cast<double>(hits) / static_cast<double>(n);
}

EvalReport evaluate(const DepthMap& pred, const DepthMap& gt, bool align) {
    EvalReport r;
    r.aligned = align;
    const DepthMap aligned = [&] {
        if (!align) return pred;
        const Alignment a = align_scale_shift(pred, gt);
        r.scale = a.scale;
        r.shift = a.shift;
        return pred.affine(a.scale, a.shift);
    }();
    r.absrel = absrel(aligned, gt);
    r.delta1 = delta1(aligned, gt);
    r.pixels = metric_pixel_count(aligned, gt);
    const Mask joint = joint_mask(pred, gt);
    r.excluded = static_cast<std::size_t>(std::count(joint.begin(), joint.end(), std::uint8_t{1})) - r.pixels;
    return r;
}

std::vector<std::pair<double, double>> scatter_sample(const DepthMap& pred, const DepthMap& gt, std::size_t n,
                                                      std::uint64_t seed) {
    const Mask joint = joint_mask(pred, gt);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] != 0) pool.push_back(i);
    }
    if (n < pool.size()) {
        // Partial Fisher-Yates: the first n slots end up a uniform sample.
        std::mt19937_64 rng(seed);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(uniform_below(rng, pool.size() - k));
            std::swap(pool[k], pool[j]);
        }
        pool.resize(n);
        std::sort(pool.begin(), pool.end());
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(pool.size());
    for (std::size_t i : pool) out.emplace_back(pred[i], gt[i]);
    return out;
}

std::string scatter_csv(const std::vector<std::pair<double, double>>& samples) {
    std::string out = "pred,gt\n";
    char line[64];
    for (const auto& [p, g] : samples) {
        std::snprintf(line, sizeof line, "%.9g,%.9g\n", p, g);
        out += line;
    }
    return out;
}

}  // namespace hdn::metrics
