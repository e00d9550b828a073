#include "hdn/contexts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hdn/error.hpp"

namespace hdn {

namespace {

void require_valid_pixels(const DepthMap& map, const char* what) {
    if (map.valid_count() == 0) {
        throw Error(ErrorKind::EmptyInput, std::string(what) + ": map has no valid pixels");
    }
}

void require_level_size(std::size_t s, const char* what) {
    if (s == 0) throw Error(ErrorKind::Parameter, std::string(what) + ": S must be at least 1");
}

// Every S = 1 level is the global context, whatever its kind.
std::string level_tag(const char* kind, std::size_t s) {
    return s == 1 ? std::string("global") : std::string(kind) + ":S=" + std::to_string(s);
}

// Builds the partition from per-pixel bin labels, dropping empty bins and
// keeping bins in label order.
Partition from_labels(std::string tag, std::size_t pixel_count, const std::vector<std::size_t>& pixels,
                      const std::vector<std::size_t>& labels, std::size_t label_count) {
    std::vector<Context> bins(label_count);
    for (std::size_t k = 0; k < pixels.size(); ++k) bins[labels[k]].push_back(pixels[k]);

    Partition p;
    p.level_tag = std::move(tag);
    p.pixel_to_context.assign(pixel_count, Partition::kUncovered);
    for (auto& bin : bins) {
        if (bin.empty()) continue;
        std::sort(bin.begin(), bin.end());
        const std::size_t id = p.contexts.size();
        for (std::size_t idx : bin) p.pixel_to_context[idx] = id;
        p.contexts.push_back(std::move(bin));
    }
    return p;
}

}  // namespace

const char* to_string(ContextKind kind) {
    switch (kind) {
        case ContextKind::Spatial: return "spatial";
        case ContextKind::DepthPercentile: return "depth_percentile";
        case ContextKind::DepthRange: return "depth_range";
    }
    return "unknown";
}

std::optional<ContextKind> parse_context_kind(std::string_view name) {
    if (name == "spatial" || name == "s") return ContextKind::Spatial;
    if (name == "depth_percentile" || name == "dp") return ContextKind::DepthPercentile;
    if (name == "depth_range" || name == "dr") return ContextKind::DepthRange;
    return std::nullopt;
}

Partition global_context(const DepthMap& map) {
    require_valid_pixels(map, "global context");
    const std::vector<std::size_t> pixels = map.valid_indices();
    return from_labels("global", map.size(), pixels, std::vector<std::size_t>(pixels.size(), 0), 1);
}

Partition batch_context(std::span<const DepthMap> maps) {
    if (maps.empty()) throw Error(ErrorKind::EmptyInput, "batch context: no maps");
    std::vector<std::size_t> pixels;
    std::size_t offset = 0;
    for (const DepthMap& m : maps) {
        require_valid_pixels(m, "batch context");
        for (std::size_t i : m.valid_indices()) pixels.push_back(offset + i);
        offset += m.size();
    }
    return from_labels("batch", offset, pixels, std::vector<std::size_t>(pixels.size(), 0), 1);
}

Partition spatial_grid(const DepthMap& map, std::size_t s) {
    require_level_size(s, "spatial grid");
    const std::size_t h = map.height();
    const std::size_t w = map.width();
    const std::vector<std::size_t> pixels = map.valid_indices();
    std::vector<std::size_t> labels(pixels.size());
    for (std::size_t k = 0; k < pixels.size(); ++k) {
        const PixelIndex px = delinearize(pixels[k], w);
        labels[k] = (px.row * s / h) * s + (px.col * s / w);
    }
    return from_labels(level_tag("spatial", s), map.size(), pixels, labels, s * s);
}

Partition depth_percentile_bins(const DepthMap& gt, std::size_t s) {
    require_level_size(s, "depth percentile bins");
    require_valid_pixels(gt, "depth percentile bins");
    std::vector<std::size_t> order = gt.valid_indices();
    std::stable_sort(order.begin(), order.end(),
                     [&gt](std::size_t a, std::size_t b) { return gt[a] < gt[b]; });

    const std::size_t m = order.size();
    const std::size_t base = m / s;
    const std::size_t extra = m % s;
    std::vector<std::size_t> labels(m);
    std::size_t pos = 0;
    for (std::size_t bin = 0; bin < s; ++bin) {
        const std::size_t len = base + (bin < extra ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) labels[pos++] = bin;
    }
    return from_labels(level_tag("depth_percentile", s), gt.size(), order, labels, s);
}

Partition depth_range_bins(const DepthMap& gt, std::size_t s) {
    require_level_size(s, "depth range bins");
    require_valid_pixels(gt, "depth range bins");
    const std::vector<std::size_t> pixels = gt.valid_indices();
    double lo = gt[pixels.front()];
    double hi = lo;
    for (std::size_t i : pixels) {
        lo = std::min(lo, gt[i]);
        hi = std::max(hi, gt[i]);
    }
    const double width = (hi - lo) / static_cast<double>(s);
    std::vector<std::size_t> labels(pixels.size(), 0);
    if (hi > lo) {
        for (std::size_t k = 0; k < pixels.size(); ++k) {
            const double pos = std::floor((gt[pixels[k]] - lo) / width);
            labels[k] = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), s - 1);
        }
    }
    return from_labels(level_tag("depth_range", s), gt.size(), pixels, labels, s);
}

ContextHierarchy assemble_hierarchy(std::vector<Partition> levels, std::size_t pixel_count) {
    ContextHierarchy h;
    h.per_pixel.resize(pixel_count);
    for (std::size_t level = 0; level < levels.size(); ++level) {
        const Partition& p = levels[level];
        if (p.pixel_to_context.size() != pixel_count) {
            throw Error(ErrorKind::Shape, "partition '" + p.level_tag + "' covers " +
                                              std::to_string(p.pixel_to_context.size()) +
                                              " pixels, expected " + std::to_string(pixel_count));
        }
        for (std::size_t ctx = 0; ctx < p.contexts.size(); ++ctx) {
            for (std::size_t idx : p.contexts[ctx]) h.per_pixel[idx].push_back({level, ctx});
        }
    }
    h.levels = std::move(levels);
    return h;
}

ContextHierarchy build_hierarchy(const DepthMap& gt, const LevelSpec& spec) {
    if (spec.sizes.empty()) throw Error(ErrorKind::Parameter, "level spec has no sizes");
    std::vector<std::size_t> seen;
    for (std::size_t s : spec.sizes) {
        require_level_size(s, "level spec");
        if (std::find(seen.begin(), seen.end(), s) != seen.end()) {
            throw Error(ErrorKind::Parameter, "level spec repeats S=" + std::to_string(s));
        }
        seen.push_back(s);
    }
    require_valid_pixels(gt, "hierarchy");

    std::vector<Partition> levels;
    levels.reserve(spec.sizes.size());
    for (std::size_t s : spec.sizes) {
        switch (spec.kind) {
            case ContextKind::Spatial: levels.push_back(spatial_grid(gt, s)); break;
            case ContextKind::DepthPercentile: levels.push_back(depth_percentile_bins(gt, s)); break;
            case ContextKind::DepthRange: levels.push_back(depth_range_bins(gt, s)); break;
        }
    }
    return assemble_hierarchy(std::move(levels), gt.size());
}

std::string partition_dump(const Partition& p) {
    std::vector<Context> sorted = p.contexts;
    for (auto& c : sorted) std::sort(c.begin(), c.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Context& a, const Context& b) { return a.front() < b.front(); });
    std::ostringstream out;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        out << "ctx" << k << ':';
        for (std::size_t idx : sorted[k]) out << ' ' << idx;
        out << '\n';
    }
    return out.str();
}

}  // namespace hdn
