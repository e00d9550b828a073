#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hdn/error.hpp"
#include "hdn/gradcheck.hpp"
#include "hdn/loss.hpp"
#include "oracle.hpp"

using hdn::ContextKind;
using hdn::DepthMap;
using hdn::Gradient;
using hdn::LevelSpec;

namespace {

const ContextKind kKinds[] = {ContextKind::Spatial, ContextKind::DepthPercentile, ContextKind::DepthRange};

std::vector<oracle::Level> oracle_levels(const DepthMap& gt, ContextKind kind, const std::vector<std::size_t>& sizes) {
    std::vector<oracle::Level> out;
    for (std::size_t s : sizes) {
        switch (kind) {
            case ContextKind::Spatial: out.push_back(oracle::spatial(gt, s)); break;
            case ContextKind::DepthPercentile: out.push_back(oracle::percentile(gt, s)); break;
            case ContextKind::DepthRange: out.push_back(oracle::range(gt, s)); break;
        }
    }
    return out;
}

// Hierarchies are built from the gt restricted to the joint mask.
DepthMap joint_gt(const DepthMap& pred, const DepthMap& gt) { return gt.with_mask(hdn::joint_mask(pred, gt)); }

double max_rel_error(const std::vector<double>& g, const std::vector<double>& fd, const hdn::Mask& skip,
                     const DepthMap& pred) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!pred.is_valid(i) || skip[i]) continue;
        const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-3 * gmax});
        if (denom > 0.0) worst = std::max(worst, std::abs(g[i] - fd[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST(Ssi, ExactMatchIsZero) {
    const DepthMap gt(2, 2, {1, 2, 3, 4});
    EXPECT_EQ(hdn::ssi_loss(gt, gt).value, 0.0);
}

TEST(Ssi, ZeroUnderPositiveAffineMaps) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> a(0.1, 10.0);
    std::uniform_real_distribution<double> b(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        const DepthMap gt = oracle::random_map(rng, 6, 7, 1.0, 5.0, 0.2, 3);
        const DepthMap pred = gt.affine(a(rng), b(rng));
        EXPECT_LT(hdn::ssi_loss(pred, gt).value, 1e-9);
        for (ContextKind k : kKinds) {
            const auto cfg = hdn::make_loss_config(gt, {k, {1, 2, 4}});
            EXPECT_LT(hdn::hdn_loss(pred, gt, cfg).value, 1e-9);
        }
    }
}

TEST(Ssi, MatchesOracle) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const DepthMap gt = oracle::random_map(rng, 5, 6, 1.0, 10.0, 0.2, 2);
        const DepthMap pred = oracle::random_map(rng, 5, 6, -3.0, 3.0, 0.2, 2);
        const hdn::Mask joint = hdn::joint_mask(pred, gt);
        if (std::count(joint.begin(), joint.end(), 1) == 0) continue;
        EXPECT_NEAR(hdn::ssi_loss(pred, gt).value, oracle::ssi_loss(pred, gt), 1e-12);
    }
}

TEST(Hdn, SingleGlobalLevelEqualsSsi) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const DepthMap gt = oracle::random_map(rng, 6, 6, 1.0, 10.0);
        const DepthMap pred = oracle::random_map(rng, 6, 6, 0.0, 2.0);
        const double ssi = hdn::ssi_loss(pred, gt).value;
        for (ContextKind k : kKinds) {
            const auto cfg = hdn::make_loss_config(gt, {k, {1}});
            EXPECT_NEAR(hdn::hdn_loss(pred, gt, cfg).value, ssi, 1e-12);
        }
    }
}

TEST(Hdn, MatchesOracleOnRandomHierarchies) {
    std::mt19937_64 rng(14);
    const std::vector<std::vector<std::size_t>> level_sets{{1}, {2}, {1, 2}, {1, 2, 4}, {3, 5}};
    int compared = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t h = 2 + rng() % 7;
        const std::size_t w = 2 + rng() % 7;
        const DepthMap gt = oracle::random_map(rng, h, w, 0.5, 30.0, 0.15, 4);
        const DepthMap pred = oracle::random_map(rng, h, w, -1.0, 1.0, 0.15, 4);
        const DepthMap jgt = joint_gt(pred, gt);
        for (ContextKind k : kKinds) {
            for (const auto& sizes : level_sets) {
                const double expected = oracle::hdn_loss(pred, gt, oracle_levels(jgt, k, sizes));
                const auto cfg = hdn::make_loss_config(jgt, {k, sizes});
                if (std::isnan(expected)) {
                    EXPECT_THROW(hdn::hdn_loss(pred, gt, cfg), hdn::Error);
                    continue;
                }
                const hdn::LossReport r = hdn::hdn_loss(pred, gt, cfg);
                EXPECT_NEAR(r.value, expected, 1e-12);
                double level_sum = 0.0;
                for (const auto& l : r.per_level) level_sum += l.value;
                EXPECT_NEAR(level_sum, r.value, 1e-12);
                ++compared;
            }
        }
    }
    EXPECT_GT(compared, 400);
}

TEST(Hdn, RangeOnSingleRowMatchesOracle) {
    const DepthMap gt(1, 8, {1.0, 1.5, 2.0, 2.5, 7.0, 8.0, 9.5, 10.0});
    const DepthMap pred(1, 8, {0.3, 0.1, 0.4, 0.2, 0.9, 0.5, 0.8, 1.0});
    const auto cfg = hdn::make_loss_config(gt, {ContextKind::DepthRange, {1, 2, 4}});
    EXPECT_NEAR(hdn::hdn_loss(pred, gt, cfg).value,
                oracle::hdn_loss(pred, gt, oracle_levels(gt, ContextKind::DepthRange, {1, 2, 4})), 1e-12);
}

TEST(Hdn, SmallContextsAreDropped) {
    // S = M gives singleton contexts only; nothing survives min_context = 2.
    const DepthMap gt(1, 4, {1, 2, 3, 4});
    const DepthMap pred(1, 4, {4, 1, 2, 3});
    try {
        hdn::local_only_loss(pred, gt, ContextKind::DepthPercentile, 4);
        FAIL();
    } catch (const hdn::Error& e) {
        EXPECT_EQ(e.kind(), hdn::ErrorKind::Degenerate);
    }
    // With a coarser level alongside, pixels keep the global context.
    const auto cfg = hdn::make_loss_config(gt, {ContextKind::DepthPercentile, {1, 4}});
    const auto r = hdn::hdn_loss(pred, gt, cfg);
    EXPECT_EQ(r.used_pixels, 4u);
    EXPECT_NEAR(r.value, hdn::ssi_loss(pred, gt).value, 1e-12);
}

TEST(Hdn, ConstantGtContextsAreSkipped) {
    const DepthMap gt(1, 6, {1, 1, 1, 5, 6, 7});
    const DepthMap pred(1, 6, {0.2, 0.9, 0.4, 1, 2, 3});
    const auto cfg = hdn::make_loss_config(gt, {ContextKind::Spatial, {2}});
    // The left half is constant in gt; only the right half contributes.
    const auto r = hdn::hdn_loss(pred, gt, cfg);
    EXPECT_EQ(r.used_pixels, 3u);
    EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(Hdn, RejectsMismatchedInputs) {
    const DepthMap a(2, 2, {1, 2, 3, 4});
    const DepthMap b(1, 4, {1, 2, 3, 4});
    EXPECT_THROW(hdn::ssi_loss(a, b), hdn::Error);
    const DepthMap none(2, 2, {1, 2, 3, 4}, hdn::Mask(4, 0));
    EXPECT_THROW(hdn::ssi_loss(a, none), hdn::Error);
    EXPECT_THROW(hdn::l1_plus_hdn(a, a, hdn::make_loss_config(a, {ContextKind::Spatial, {1}}), -1.0), hdn::Error);
}

TEST(Hdn, L1PlusHdnAddsMeanAbsoluteError) {
    std::mt19937_64 rng(15);
    const DepthMap gt = oracle::random_map(rng, 5, 5, 1.0, 4.0);
    const DepthMap pred = oracle::random_map(rng, 5, 5, 1.0, 4.0);
    const auto cfg = hdn::make_loss_config(gt, {ContextKind::Spatial, {1, 2}});
    const double hdn_value = hdn::hdn_loss(pred, gt, cfg).value;
    const auto r = hdn::l1_plus_hdn(pred, gt, cfg, 0.5);
    EXPECT_NEAR(r.value, oracle::l1(pred, gt) + 0.5 * hdn_value, 1e-12);
    EXPECT_NEAR(hdn::l1_plus_hdn(pred, gt, cfg, 0.0).value, oracle::l1(pred, gt), 1e-12);
}

TEST(Batch, PerImageScalesBreakSharedContext) {
    const DepthMap gt1(2, 2, {1, 2, 3, 4});
    const DepthMap gt2(2, 2, {2, 3, 5, 8});
    const DepthMap pred1 = gt1.affine(1.0, 0.0);
    const DepthMap pred2 = gt2.affine(5.0, 20.0);
    EXPECT_LT(hdn::ssi_loss(pred1, gt1).value, 1e-9);
    EXPECT_LT(hdn::ssi_loss(pred2, gt2).value, 1e-9);
    const std::vector<DepthMap> preds{pred1, pred2};
    const std::vector<DepthMap> gts{gt1, gt2};
    const auto r = hdn::batch_ssi_loss(preds, gts);
    EXPECT_GT(r.value, 0.1);

    // Same value as SSI over the stacked maps.
    const DepthMap stacked_pred(4, 2, {1, 2, 3, 4, 30, 35, 45, 60});
    const DepthMap stacked_gt(4, 2, {1, 2, 3, 4, 2, 3, 5, 8});
    EXPECT_NEAR(r.value, oracle::ssi_loss(stacked_pred, stacked_gt), 1e-12);
    ASSERT_TRUE(r.gradient.has_value());
    EXPECT_EQ(r.gradient->size(), 8u);
}

TEST(Gradient, ZeroAtAffineMatch) {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        const DepthMap gt = oracle::random_map(rng, 6, 6, 1.0, 5.0, 0.1, 4);
        const DepthMap pred = gt.affine(2.5, -1.0);
        for (ContextKind k : kKinds) {
            const auto cfg = hdn::make_loss_config(gt, {k, {1, 2}});
            double norm = 0.0;
            for (double g : hdn::hdn_gradient(pred, gt, cfg)) norm += g * g;
            EXPECT_LT(std::sqrt(norm), 1e-9);
        }
    }
}

TEST(Gradient, MatchesOracleFiniteDifferences) {
    std::mt19937_64 rng(17);
    int checked = 0;
    for (ContextKind k : kKinds) {
        for (int trial = 0; trial < 20; ++trial) {
            const DepthMap gt = oracle::random_map(rng, 6, 5, 1.0, 20.0, 0.1, 6);
            const DepthMap pred = oracle::random_map(rng, 6, 5, 0.0, 3.0, 0.1, 6);
            const DepthMap jgt = joint_gt(pred, gt);
            const std::vector<std::size_t> sizes{1, 2, 3};
            const auto cfg = hdn::make_loss_config(jgt, {k, sizes});
            const auto levels = oracle_levels(jgt, k, sizes);
            const auto fd = oracle::finite_difference(
                pred, [&](const DepthMap& p) { return oracle::hdn_loss(p, gt, levels); }, 1e-5);
            const hdn::Mask skip = hdn::tie_neighborhood_mask(pred, gt, cfg, 1e-4);
            EXPECT_LT(max_rel_error(hdn::hdn_gradient(pred, gt, cfg), fd, skip, pred), 1e-4);
            checked += static_cast<int>(std::count(skip.begin(), skip.end(), 0));
        }
    }
    EXPECT_GT(checked, 200);
}

TEST(Gradient, EvenContextMedianAveragesBothMiddleElements) {
    const DepthMap gt(1, 4, {1, 2, 4, 8});
    const DepthMap pred(1, 4, {0.3, 1.1, 0.7, 2.9});
    const auto cfg = hdn::make_loss_config(gt, {ContextKind::Spatial, {1}});
    const auto fd = oracle::finite_difference(pred, [&](const DepthMap& p) { return oracle::ssi_loss(p, gt); }, 1e-6);
    const auto g = hdn::hdn_gradient(pred, gt, cfg);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], fd[i], 1e-6);
}

TEST(Gradient, SsiAndL1PlusHdnPassCheck) {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const DepthMap gt = oracle::random_map(rng, 5, 5, 1.0, 9.0);
        const DepthMap pred = oracle::random_map(rng, 5, 5, 1.0, 9.0);
        const auto cfg = hdn::make_loss_config(gt, {ContextKind::DepthRange, {1, 2}});
        const auto ssi = hdn::check_gradient([&](const DepthMap& p) { return hdn::ssi_loss(p, gt); }, pred,
                                             hdn::tie_neighborhood_mask(pred, gt, hdn::make_loss_config(gt, {ContextKind::Spatial, {1}}), 1e-4),
                                             1e-5, 1e-4);
        EXPECT_TRUE(ssi.pass) << ssi.max_rel_error;
        const auto l1 = hdn::check_gradient([&](const DepthMap& p) { return hdn::l1_plus_hdn(p, gt, cfg, 2.0); },
                                            pred, hdn::tie_neighborhood_mask(pred, gt, cfg, 1e-4, true), 1e-5, 1e-4);
        EXPECT_TRUE(l1.pass) << l1.max_rel_error;
    }
}

TEST(Gradient, ZeroOutsideJointMask) {
    const DepthMap gt(1, 5, {1, 2, 3, 4, 5}, {1, 1, 0, 1, 1});
    const DepthMap pred(1, 5, {0.5, 0.1, 0.9, 0.2, 0.8}, {1, 1, 1, 1, 0});
    const auto cfg = hdn::make_loss_config(joint_gt(pred, gt), {ContextKind::Spatial, {1}});
    const auto g = hdn::hdn_gradient(pred, gt, cfg);
    EXPECT_EQ(g[2], 0.0);
    EXPECT_EQ(g[4], 0.0);
}

TEST(Gradient, SkipModeOmitsGradient) {
    const DepthMap gt(1, 3, {1, 2, 3});
    EXPECT_FALSE(hdn::ssi_loss(gt, gt, hdn::kDefaultEps, Gradient::Skip).gradient.has_value());
}

TEST(Gradient, TieHeavyInputsPassOutsideTheMask) {
    std::mt19937_64 rng(19);
    std::size_t checked = 0;
    for (ContextKind k : kKinds) {
        for (int trial = 0; trial < 30; ++trial) {
            const DepthMap gt = oracle::random_map(rng, 7, 7, 1.0, 6.0);
            // Few distinct values: many exact ties in pred and repeated medians.
            std::vector<double> v(49);
            for (auto& x : v) x = static_cast<double>(rng() % 6) * 0.5;
            const DepthMap pred(7, 7, v);
            const auto cfg = hdn::make_loss_config(gt, {k, {1, 2, 4}});
            const hdn::Mask skip = hdn::tie_neighborhood_mask(pred, gt, cfg, 1e-4);
            const auto r = hdn::check_gradient([&](const DepthMap& p) { return hdn::hdn_loss(p, gt, cfg); }, pred,
                                               skip, 1e-5, 1e-4);
            EXPECT_LT(r.max_rel_error, 1e-4);
            checked += r.checked;
        }
    }
    EXPECT_GT(checked, 0u);
}

TEST(Gradient, NearAffinePredictionPassesOutsideTheMask) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 1e-3);
    for (ContextKind k : kKinds) {
        for (int trial = 0; trial < 10; ++trial) {
            const DepthMap gt = oracle::random_map(rng, 12, 12, 1.0, 6.0);
            std::vector<double> v(gt.values().begin(), gt.values().end());
            for (auto& x : v) x = 2.0 * x + 1.0 + noise(rng);
            const DepthMap pred(12, 12, v);
            const auto cfg = hdn::make_loss_config(gt, {k, {1, 2, 4}});
            const auto r = hdn::check_gradient([&](const DepthMap& p) { return hdn::hdn_loss(p, gt, cfg); }, pred,
                                               hdn::tie_neighborhood_mask(pred, gt, cfg, 1e-4), 1e-5, 1e-4);
            EXPECT_LT(r.max_rel_error, 1e-4);
        }
    }
}
