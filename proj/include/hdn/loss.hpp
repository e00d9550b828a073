#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdn/contexts.hpp"
#include "hdn/depth_map.hpp"
#include "hdn/normalization.hpp"

namespace hdn {

struct LossConfig {
    ContextHierarchy hierarchy;
    double eps = kDefaultEps;
    /// Contexts with fewer joint-valid pixels are dropped.
    std::size_t min_context = 2;
    /// Drop contexts whose ground-truth mad is <= eps.
    bool gt_degenerate_skip = true;
};

LossConfig make_loss_config(const DepthMap& gt, const LevelSpec& spec, double eps = kDefaultEps,
                            std::size_t min_context = 2);

struct LevelContribution {
    std::string level_tag;
    /// Mean over used pixels of this level's share of the per-pixel loss.
    /// The contributions of all levels sum to the loss value.
    double value = 0.0;
};

struct LossReport {
    double value = 0.0;
    /// dL/d(pred) per linear pixel; zero at pixels that do not take part.
    std::optional<std::vector<double>> gradient;
    std::vector<LevelContribution> per_level;
    std::size_t used_pixels = 0;
};

enum class Gradient { Skip, Compute };

/// Scale-and-shift invariant loss over the single global context of the
/// joint-valid pixels.
LossReport ssi_loss(const DepthMap& pred, const DepthMap& gt, double eps = kDefaultEps,
                    Gradient grad = Gradient::Compute);

/// Per-pixel average over U_i of the normalized absolute residuals, averaged
/// over the pixels that keep at least one context after filtering.
LossReport hdn_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                    Gradient grad = Gradient::Compute);

std::vector<double> hdn_gradient(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg);

/// Mean absolute error over joint-valid pixels plus lambda * HDN.
LossReport l1_plus_hdn(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg, double lambda,
                       Gradient grad = Gradient::Compute);

/// HDN restricted to a single level of the given kind.
LossReport local_only_loss(const DepthMap& pred, const DepthMap& gt, ContextKind kind, std::size_t s,
                           double eps = kDefaultEps, std::size_t min_context = 2,
                           Gradient grad = Gradient::Compute);

/// SSI with one context spanning the joint-valid pixels of every pair. The
/// gradient is laid out over the concatenated pixel space.
LossReport batch_ssi_loss(std::span<const DepthMap> preds, std::span<const DepthMap> gts,
                          double eps = kDefaultEps, Gradient grad = Gradient::Compute);

/// Pixels whose finite-difference derivative may straddle a kink: a
/// perturbation of size `tau` at the pixel could flip a residual sign, a
/// deviation sign, the median selection or the mad clamp of one of its
/// contexts.
Mask tie_neighborhood_mask(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg, double tau,
                           bool include_l1 = false);

}  // namespace hdn
