#include "hdn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "hdn/error.hpp"

namespace hdn {

namespace {

// Normalized residuals this small are treated as exact zeros, so a prediction
// that is an exact affine image of the ground truth gets the zero subgradient
// rather than rounding noise.
constexpr double kResidualZero = 1e-10;

double residual_sign(double r) {
    if (std::abs(r) <= kResidualZero) return 0.0;
    return r > 0.0 ? 1.0 : -1.0;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<double> gather(std::span<const double> values, const Context& members) {
    std::vector<double> out(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) out[k] = values[members[k]];
    return out;
}

// A context that survived filtering, with its joint-valid members and the
// normalized ground truth (which never depends on the prediction).
struct ActiveContext {
    std::size_t level = 0;
    Context members;
    std::vector<double> gt_normalized;
};

struct FilterRules {
    double eps = kDefaultEps;
    std::size_t min_context = 2;
    bool gt_degenerate_skip = true;
};

std::vector<ActiveContext> active_contexts(std::span<const double> gt, const Mask& joint,
                                           const std::vector<Partition>& levels, const FilterRules& rules) {
    std::vector<ActiveContext> out;
    for (std::size_t level = 0; level < levels.size(); ++level) {
        for (const Context& ctx : levels[level].contexts) {
            Context members;
            members.reserve(ctx.size());
            for (std::size_t idx : ctx) {
                if (joint[idx] != 0) members.push_back(idx);
            }
            if (members.size() < rules.min_context || members.empty()) continue;
            NormalizedContext g = normalize_context(gather(gt, members), rules.eps);
            if (rules.gt_degenerate_skip && g.stats.mad <= rules.eps) continue;
            out.push_back(ActiveContext{level, std::move(members), std::move(g.values)});
        }
    }
    return out;
}

// Adds the gradient of sum_k weight_k * |N(p_k) - gt_k| over one context to
// `grad`. Median selection and every sign are held at their current branch.
void accumulate_context_gradient(std::span<const double> pred_values, const NormalizedContext& pred_norm,
                                 std::span<const double> residuals, std::span<const double> weights,
                                 double eps, const Context& members, std::vector<double>& grad) {
    const std::size_t n = pred_values.size();
    const ContextStats& st = pred_norm.stats;
    const double s = std::max(st.mad, eps);
    const bool clamped = st.mad < eps;

    double a = 0.0;  // sum w * sign(r)
    double b = 0.0;  // sum w * sign(r) * (p - m)
    double dev_sign_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double sr = residual_sign(residuals[k]);
        a += weights[k] * sr;
        b += weights[k] * sr * (pred_values[k] - st.median);
        dev_sign_sum += sign(pred_values[k] - st.median);
    }
    const double ds_coeff = clamped ? 0.0 : b / (s * s * static_cast<double>(n));

    for (std::size_t k = 0; k < n; ++k) {
        const double sr = residual_sign(residuals[k]);
        grad[members[k]] += weights[k] * sr / s - ds_coeff * sign(pred_values[k] - st.median);
    }

    // A clamped context is a block of tied values with no single median element.
    if (clamped) return;
    const MedianSelection sel = median_selection(pred_values);
    const double dm = sel.lower == sel.upper ? 1.0 : 0.5;
    for (std::size_t k : {sel.lower, sel.upper}) {
        grad[members[k]] += -(a / s) * dm + ds_coeff * dev_sign_sum * dm;
        if (sel.lower == sel.upper) break;
    }
}

// Shared evaluation over flat arrays; used for single maps and for the
// concatenated batch space.
LossReport evaluate(std::span<const double> pred, std::span<const double> gt, const Mask& joint,
                    const std::vector<Partition>& levels, const FilterRules& rules, Gradient grad_mode) {
    const std::vector<ActiveContext> active = active_contexts(gt, joint, levels, rules);

    std::vector<std::size_t> context_count(pred.size(), 0);
    for (const ActiveContext& ac : active) {
        for (std::size_t idx : ac.members) ++context_count[idx];
    }
    const std::size_t used = static_cast<std::size_t>(
        std::count_if(context_count.begin(), context_count.end(), [](std::size_t c) { return c > 0; }));
    if (used == 0) {
        throw Error(ErrorKind::Degenerate, "every context was filtered out (min_context=" +
                                               std::to_string(rules.min_context) +
                                               ", degenerate ground truth skipped=" +
                                               (rules.gt_degenerate_skip ? "yes" : "no") + ")");
    }

    LossReport report;
    report.used_pixels = used;
    report.per_level.resize(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) report.per_level[l].level_tag = levels[l].level_tag;
    if (grad_mode == Gradient::Compute) report.gradient.emplace(pred.size(), 0.0);

    // Per-pixel sums first, then the outer mean, so the summation order
    // follows the definition and is fixed.
    std::vector<double> pixel_sum(pred.size(), 0.0);
    std::vector<double> level_sum(levels.size(), 0.0);
    const double inv_used = 1.0 / static_cast<double>(used);
    for (const ActiveContext& ac : active) {
        const std::vector<double> p = gather(pred, ac.members);
        const NormalizedContext pn = normalize_context(p, rules.eps);
        std::vector<double> residuals(p.size());
        std::vector<double> weights(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            const std::size_t idx = ac.members[k];
            residuals[k] = pn.values[k] - ac.gt_normalized[k];
            const double share = std::abs(residuals[k]) / static_cast<double>(context_count[idx]);
            pixel_sum[idx] += share;
            level_sum[ac.level] += share;
            weights[k] = inv_used / static_cast<double>(context_count[idx]);
        }
        if (report.gradient) {
            accumulate_context_gradient(p, pn, residuals, weights, rules.eps, ac.members, *report.gradient);
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (context_count[i] > 0) total += pixel_sum[i];
    }
    report.value = total * inv_used;
    for (std::size_t l = 0; l < levels.size(); ++l) report.per_level[l].value = level_sum[l] * inv_used;
    return report;
}

void require_matching(const DepthMap& pred, const DepthMap& gt, const LossConfig* cfg) {
    if (!pred.same_shape(gt)) {
        throw Error(ErrorKind::Shape, "prediction is " + std::to_string(pred.height()) + "x" +
                                          std::to_string(pred.width()) + " but ground truth is " +
                                          std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    }
    if (cfg && cfg->hierarchy.per_pixel.size() != pred.size()) {
        throw Error(ErrorKind::Shape, "context hierarchy covers " +
                                          std::to_string(cfg->hierarchy.per_pixel.size()) +
                                          " pixels, maps have " + std::to_string(pred.size()));
    }
}

Mask require_joint(const DepthMap& pred, const DepthMap& gt) {
    Mask joint = joint_mask(pred, gt);
    if (std::none_of(joint.begin(), joint.end(), [](std::uint8_t v) { return v != 0; })) {
        throw Error(ErrorKind::EmptyInput, "prediction and ground truth share no valid pixels");
    }
    return joint;
}

FilterRules rules_of(const LossConfig& cfg) {
    if (!(cfg.eps > 0.0)) throw Error(ErrorKind::Parameter, "eps must be positive");
    if (cfg.min_context < 2) throw Error(ErrorKind::Parameter, "min_context must be at least 2");
    return FilterRules{cfg.eps, cfg.min_context, cfg.gt_degenerate_skip};
}

}  // namespace

LossConfig make_loss_config(const DepthMap& gt, const LevelSpec& spec, double eps, std::size_t min_context) {
    LossConfig cfg;
    cfg.hierarchy = build_hierarchy(gt, spec);
    cfg.eps = eps;
    cfg.min_context = min_context;
    return cfg;
}

LossReport ssi_loss(const DepthMap& pred, const DepthMap& gt, double eps, Gradient grad) {
    require_matching(pred, gt, nullptr);
    if (!(eps > 0.0)) throw Error(ErrorKind::Parameter, "eps must be positive");
    const Mask joint = require_joint(pred, gt);
    Context members;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] != 0) members.push_back(i);
    }
    const std::vector<double> p = gather(pred.values(), members);
    const NormalizedContext pn = normalize_context(p, eps);
    const NormalizedContext gn = normalize_context(gather(gt.values(), members), eps);

    const double inv_m = 1.0 / static_cast<double>(members.size());
    std::vector<double> residuals(members.size());
    double total = 0.0;
    for (std::size_t k = 0; k < members.size(); ++k) {
        residuals[k] = pn.values[k] - gn.values[k];
        total += std::abs(residuals[k]);
    }

    LossReport report;
    report.value = total * inv_m;
    report.used_pixels = members.size();
    report.per_level.push_back({"global", report.value});
    if (grad == Gradient::Compute) {
        report.gradient.emplace(pred.size(), 0.0);
        const std::vector<double> weights(members.size(), inv_m);
        accumulate_context_gradient(p, pn, residuals, weights, eps, members, *report.gradient);
    }
    return report;
}

LossReport hdn_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg, Gradient grad) {
    require_matching(pred, gt, &cfg);
    const FilterRules rules = rules_of(cfg);
    const Mask joint = require_joint(pred, gt);
    return evaluate(pred.values(), gt.values(), joint, cfg.hierarchy.levels, rules, grad);
}

std::vector<double> hdn_gradient(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg) {
    return std::move(*hdn_loss(pred, gt, cfg, Gradient::Compute).gradient);
}

LossReport l1_plus_hdn(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg, double lambda,
                       Gradient grad) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::Parameter, "lambda must be a nonnegative finite number");
    }
    require_matching(pred, gt, &cfg);
    const Mask joint = require_joint(pred, gt);

    std::size_t m = 0;
    double l1 = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint[i] == 0) continue;
        ++m;
        l1 += std::abs(pred[i] - gt[i]);
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    l1 *= inv_m;

    LossReport report;
    if (lambda > 0.0) {
        report = hdn_loss(pred, gt, cfg, grad);
        report.value *= lambda;
        for (auto& level : report.per_level) level.value *= lambda;
        if (report.gradient) {
            for (double& g : *report.gradient) g *= lambda;
        }
    } else {
        report.used_pixels = m;
        if (grad == Gradient::Compute) report.gradient.emplace(pred.size(), 0.0);
    }
    report.value += l1;
    report.per_level.insert(report.per_level.begin(), LevelContribution{"l1", l1});
    if (report.gradient) {
        for (std::size_t i = 0; i < joint.size(); ++i) {
            if (joint[i] != 0) (*report.gradient)[i] += sign(pred[i] - gt[i]) * inv_m;
        }
    }
    return report;
}

LossReport local_only_loss(const DepthMap& pred, const DepthMap& gt, ContextKind kind, std::size_t s,
                           double eps, std::size_t min_context, Gradient grad) {
    const LossConfig cfg = make_loss_config(gt, LevelSpec{kind, {s}}, eps, min_context);
    return hdn_loss(pred, gt, cfg, grad);
}

LossReport batch_ssi_loss(std::span<const DepthMap> preds, std::span<const DepthMap> gts, double eps,
                          Gradient grad) {
    if (preds.empty() || gts.empty()) throw Error(ErrorKind::EmptyInput, "batch is empty");
    if (preds.size() != gts.size()) {
        throw Error(ErrorKind::Shape, "batch has " + std::to_string(preds.size()) + " predictions but " +
                                          std::to_string(gts.size()) + " ground truths");
    }
    if (!(eps > 0.0)) throw Error(ErrorKind::Parameter, "eps must be positive");
    std::vector<double> pred_flat;
    std::vector<double> gt_flat;
    Mask joint_flat;
    std::vector<DepthMap> joint_maps;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        require_matching(preds[k], gts[k], nullptr);
        Mask joint = joint_mask(preds[k], gts[k]);
        pred_flat.insert(pred_flat.end(), preds[k].values().begin(), preds[k].values().end());
        gt_flat.insert(gt_flat.end(), gts[k].values().begin(), gts[k].values().end());
        joint_flat.insert(joint_flat.end(), joint.begin(), joint.end());
        joint_maps.push_back(gts[k].with_mask(std::move(joint)));
    }
    // The batch context is the single level; no filtering beyond a non-empty
    // joint mask, mirroring the instance-level loss.
    std::vector<Partition> levels{batch_context(joint_maps)};
    const FilterRules rules{eps, 1, false};
    return evaluate(pred_flat, gt_flat, joint_flat, levels, rules, grad);
}

Mask tie_neighborhood_mask(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg, double tau,
                           bool include_l1) {
    require_matching(pred, gt, &cfg);
    const FilterRules rules = rules_of(cfg);
    const Mask joint = require_joint(pred, gt);
    const std::vector<ActiveContext> active = active_contexts(gt.values(), joint, cfg.hierarchy.levels, rules);

    Mask ties(pred.size(), 0);
    for (const ActiveContext& ac : active) {
        const std::vector<double> p = gather(pred.values(), ac.members);
        const NormalizedContext pn = normalize_context(p, rules.eps);
        const std::size_t n = p.size();
        const double s = std::max(pn.stats.mad, rules.eps);
        const double m = pn.stats.median;
        const MedianSelection sel = median_selection(p);
        const auto flag = [&](std::size_t k) { ties[ac.members[k]] = 1; };
        const auto flag_all = [&] {
            for (std::size_t idx : ac.members) ties[idx] = 1;
        };
        const auto flag_median = [&] {
            flag(sel.lower);
            flag(sel.upper);
        };

        if (pn.stats.mad < rules.eps + tau) {
            flag_all();
            continue;
        }
        bool all = false;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = std::abs(pn.values[k] - ac.gt_normalized[k]);
            // Moving p_k by tau moves N_k by about tau (1 + |N_k|) / s; moving
            // any other element changes s by at most tau / n; moving a median
            // element shifts m by up to tau.
            const double reach = tau * (1.0 + std::abs(pn.values[k])) / s;
            if (r < reach) {
                flag(k);
                flag_median();
            }
            if (r < reach / static_cast<double>(n)) all = true;
            // Deviation sign of p_k, which p_k and the median elements move.
            if (k != sel.lower && k != sel.upper && std::abs(p[k] - m) < tau) {
                flag(k);
                flag_median();
            }
        }
        if (all) {
            flag_all();
            continue;
        }
        // Values close to a median element can take its place in the selection.
        for (std::size_t k = 0; k < n; ++k) {
            if (k == sel.lower || k == sel.upper) continue;
            if (std::abs(p[k] - p[sel.lower]) < 2.0 * tau || std::abs(p[k] - p[sel.upper]) < 2.0 * tau) {
                flag(k);
                flag_median();
            }
        }
        if (sel.lower != sel.upper && p[sel.upper] - p[sel.lower] < 2.0 * tau) flag_median();
    }
    if (include_l1) {
        for (std::size_t i = 0; i < joint.size(); ++i) {
            if (joint[i] != 0 && std::abs(pred[i] - gt[i]) < tau) ties[i] = 1;
        }
    }
    return ties;
}

}  // namespace hdn
