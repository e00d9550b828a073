#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdn/depth_map.hpp"

namespace hdn {

/// Pixels sharing normalization statistics. Members are linear indices in
/// ascending order.
using Context = std::vector<std::size_t>;

/// One level's decomposition of the valid pixels into disjoint, non-empty
/// contexts.
struct Partition {
    static constexpr std::size_t kUncovered = static_cast<std::size_t>(-1);

    std::string level_tag;
    std::vector<Context> contexts;
    /// Indexed by linear pixel; kUncovered for invalid pixels.
    std::vector<std::size_t> pixel_to_context;
};

enum class ContextKind { Spatial, DepthPercentile, DepthRange };

const char* to_string(ContextKind kind);
std::optional<ContextKind> parse_context_kind(std::string_view name);

struct LevelSpec {
    ContextKind kind = ContextKind::Spatial;
    std::vector<std::size_t> sizes;
};

/// Membership of one pixel in one level.
struct ContextRef {
    std::size_t level = 0;
    std::size_t context = 0;

    bool operator==(const ContextRef&) const = default;
};

struct ContextHierarchy {
    std::vector<Partition> levels;
    /// U_i for every linear pixel; empty for invalid pixels.
    std::vector<std::vector<ContextRef>> per_pixel;
};

Partition global_context(const DepthMap& map);

/// One context spanning every valid pixel of every map. Pixel i of map k
/// gets index offset_k + i, where offset_k is the summed size of maps before k.
Partition batch_context(std::span<const DepthMap> maps);

/// S x S grid; pixel (r, c) falls in cell (floor(r*S/H), floor(c*S/W)).
Partition spatial_grid(const DepthMap& map, std::size_t s);

/// S equal-count bins over valid pixels sorted by (value, linear index);
/// the first M mod S bins hold one extra pixel.
Partition depth_percentile_bins(const DepthMap& gt, std::size_t s);

/// S equal-width bins over [min, max] of the valid values; the maximum is
/// clamped into the last bin and empty bins are dropped.
Partition depth_range_bins(const DepthMap& gt, std::size_t s);

/// One partition per size in `spec`, in the given order.
ContextHierarchy build_hierarchy(const DepthMap& gt, const LevelSpec& spec);

/// Assembles per-pixel memberships for an arbitrary list of partitions over
/// `pixel_count` pixels.
ContextHierarchy assemble_hierarchy(std::vector<Partition> levels, std::size_t pixel_count);

/// "ctx<k>: <idx> <idx> ..." lines, contexts ordered by smallest member.
std::string partition_dump(const Partition& p);

}  // namespace hdn
