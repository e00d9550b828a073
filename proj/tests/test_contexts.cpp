#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hdn/contexts.hpp"
#include "hdn/error.hpp"
#include "oracle.hpp"

using hdn::ContextKind;
using hdn::DepthMap;
using hdn::Partition;

namespace {

std::vector<std::size_t> sizes(const Partition& p) {
    std::vector<std::size_t> out;
    for (const auto& c : p.contexts) out.push_back(c.size());
    std::sort(out.rbegin(), out.rend());
    return out;
}

std::set<hdn::Context> as_set(const std::vector<hdn::Context>& level) {
    return {level.begin(), level.end()};
}

// Every valid pixel in exactly one context, invalid pixels in none.
void expect_partition(const Partition& p, const DepthMap& m) {
    std::vector<int> hits(m.size(), 0);
    for (std::size_t k = 0; k < p.contexts.size(); ++k) {
        EXPECT_FALSE(p.contexts[k].empty());
        EXPECT_TRUE(std::is_sorted(p.contexts[k].begin(), p.contexts[k].end()));
        for (std::size_t i : p.contexts[k]) {
            ++hits[i];
            EXPECT_EQ(p.pixel_to_context[i], k);
        }
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(hits[i], m.is_valid(i) ? 1 : 0) << "pixel " << i;
        if (!m.is_valid(i)) EXPECT_EQ(p.pixel_to_context[i], Partition::kUncovered);
    }
}

DepthMap row(std::vector<double> v) {
    const std::size_t n = v.size();
    return DepthMap(1, n, std::move(v));
}

}  // namespace

TEST(Spatial, ThreeByThreeWithTwoCells) {
    const DepthMap m(3, 3, std::vector<double>(9, 1.0));
    const Partition p = hdn::spatial_grid(m, 2);
    EXPECT_EQ(sizes(p), (std::vector<std::size_t>{4, 2, 2, 1}));
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{0, 1, 3, 4}, {2, 5}, {6, 7}, {8}}));
}

TEST(Spatial, OneCellIsTheGlobalContext) {
    std::mt19937_64 rng(1);
    const DepthMap m = oracle::random_map(rng, 5, 7, 0.0, 1.0, 0.3, 2);
    const Partition p = hdn::spatial_grid(m, 1);
    ASSERT_EQ(p.contexts.size(), 1u);
    EXPECT_EQ(p.contexts[0], hdn::global_context(m).contexts[0]);
    EXPECT_EQ(p.level_tag, "global");
}

TEST(Spatial, MoreCellsThanPixelsDropsEmptyCells) {
    const DepthMap m(2, 2, {1, 2, 3, 4});
    const Partition p = hdn::spatial_grid(m, 5);
    EXPECT_EQ(p.contexts.size(), 4u);
    expect_partition(p, m);
}

TEST(Percentile, SortsByValue) {
    const Partition p = hdn::depth_percentile_bins(row({5, 1, 3, 9}), 2);
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{1, 2}, {0, 3}}));
}

TEST(Percentile, RemainderGoesToLeadingBins) {
    EXPECT_EQ(sizes(hdn::depth_percentile_bins(row({1, 2, 3, 4, 5}), 2)), (std::vector<std::size_t>{3, 2}));
    const Partition p = hdn::depth_percentile_bins(row({1, 2, 3, 4, 5, 6, 7}), 3);
    EXPECT_EQ(p.contexts, (std::vector<hdn::Context>{{0, 1, 2}, {3, 4}, {5, 6}}));
}

TEST(Percentile, TiesBrokenByIndex) {
    const Partition p = hdn::depth_percentile_bins(row({2, 2, 2, 2}), 2);
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{0, 1}, {2, 3}}));
}

TEST(Percentile, BinsEqualToPixelsGivesSingletons) {
    const Partition p = hdn::depth_percentile_bins(row({4, 3, 2, 1}), 4);
    EXPECT_EQ(sizes(p), (std::vector<std::size_t>(4, 1)));
}

TEST(Range, EqualWidthBins) {
    const Partition p = hdn::depth_range_bins(row({0, 1, 2, 10}), 2);
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{0, 1, 2}, {3}}));
}

TEST(Range, MaximumClampedIntoLastBin) {
    const Partition p = hdn::depth_range_bins(row({0, 5, 10}), 2);
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{0}, {1, 2}}));
}

TEST(Range, ConstantMapIsOneContext) {
    const Partition p = hdn::depth_range_bins(row({3, 3, 3}), 4);
    ASSERT_EQ(p.contexts.size(), 1u);
    EXPECT_EQ(p.contexts[0].size(), 3u);
}

TEST(Range, EmptyBinsDropped) {
    const Partition p = hdn::depth_range_bins(row({0, 0.1, 9.9, 10}), 10);
    EXPECT_EQ(as_set(p.contexts), (std::set<hdn::Context>{{0, 1}, {2, 3}}));
}

TEST(Batch, OffsetsConcatenateMaps) {
    const std::vector<DepthMap> maps{DepthMap(1, 2, {1, 2}), DepthMap(1, 3, {3, 4, 5}, {1, 0, 1})};
    const Partition p = hdn::batch_context(maps);
    ASSERT_EQ(p.contexts.size(), 1u);
    EXPECT_EQ(p.contexts[0], (hdn::Context{0, 1, 2, 4}));
    EXPECT_EQ(p.pixel_to_context.size(), 5u);
    EXPECT_EQ(p.pixel_to_context[3], Partition::kUncovered);
}

TEST(Contexts, RandomMapsMatchOracleAndPartition) {
    std::mt19937_64 rng(20);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t h = 1 + rng() % 9;
        const std::size_t w = 1 + rng() % 9;
        const DepthMap m = oracle::random_map(rng, h, w, 0.5, 20.0, 0.25, 1);
        for (std::size_t s : {1u, 2u, 3u, 4u, 8u}) {
            const Partition sp = hdn::spatial_grid(m, s);
            const Partition dp = hdn::depth_percentile_bins(m, s);
            const Partition dr = hdn::depth_range_bins(m, s);
            expect_partition(sp, m);
            expect_partition(dp, m);
            expect_partition(dr, m);
            EXPECT_EQ(as_set(sp.contexts), as_set(oracle::spatial(m, s)));
            EXPECT_EQ(as_set(dp.contexts), as_set(oracle::percentile(m, s)));
            EXPECT_EQ(as_set(dr.contexts), as_set(oracle::range(m, s)));
            EXPECT_LE(sp.contexts.size(), s * s);
            EXPECT_LE(dp.contexts.size(), s);
            EXPECT_LE(dr.contexts.size(), s);
        }
    }
}

TEST(Hierarchy, PerPixelMembershipFollowsLevels) {
    const DepthMap m(4, 4, std::vector<double>(16, 2.0), hdn::Mask{1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    const hdn::ContextHierarchy h = hdn::build_hierarchy(m, {ContextKind::Spatial, {1, 2, 4}});
    ASSERT_EQ(h.levels.size(), 3u);
    EXPECT_EQ(h.levels[0].level_tag, "global");
    EXPECT_TRUE(h.per_pixel[5].empty());
    ASSERT_EQ(h.per_pixel[15].size(), 3u);
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& ref = h.per_pixel[15][l];
        EXPECT_EQ(ref.level, l);
        const auto& ctx = h.levels[l].contexts[ref.context];
        EXPECT_TRUE(std::binary_search(ctx.begin(), ctx.end(), std::size_t{15}));
    }
}

TEST(Hierarchy, RejectsBadLevelLists) {
    const DepthMap m(2, 2, {1, 2, 3, 4});
    EXPECT_THROW(hdn::build_hierarchy(m, {ContextKind::Spatial, {}}), hdn::Error);
    EXPECT_THROW(hdn::build_hierarchy(m, {ContextKind::Spatial, {0}}), hdn::Error);
    EXPECT_THROW(hdn::build_hierarchy(m, {ContextKind::Spatial, {2, 2}}), hdn::Error);
}

TEST(Contexts, KindNamesRoundTrip) {
    for (ContextKind k : {ContextKind::Spatial, ContextKind::DepthPercentile, ContextKind::DepthRange}) {
        EXPECT_EQ(hdn::parse_context_kind(hdn::to_string(k)), k);
    }
    EXPECT_EQ(hdn::parse_context_kind("dp"), ContextKind::DepthPercentile);
    EXPECT_FALSE(hdn::parse_context_kind("nope").has_value());
}

TEST(Contexts, DumpOrdersBySmallestMember) {
    const Partition p = hdn::depth_percentile_bins(row({5, 1, 3, 9}), 2);
    EXPECT_EQ(hdn::partition_dump(p), "ctx0: 0 3\nctx1: 1 2\n");
}
