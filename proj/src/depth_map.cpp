#include "hdn/depth_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdn/error.hpp"

namespace hdn {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Format: return "format";
        case ErrorKind::Io: return "io";
        case ErrorKind::EmptyInput: return "empty-input";
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Degenerate: return "degenerate-input";
        case ErrorKind::DegenerateAlignment: return "degenerate-alignment";
        case ErrorKind::Divergence: return "divergence";
    }
    return "unknown";
}

DepthMap::DepthMap(std::size_t height, std::size_t width, std::vector<double> values)
    : DepthMap(height, width, std::move(values), Mask(height * width, 1)) {}

DepthMap::DepthMap(std::size_t height, std::size_t width, std::vector<double> values, Mask valid)
    : height_(height), width_(width), values_(std::move(values)), valid_(std::move(valid)) {
    if (height_ == 0 || width_ == 0) {
        throw Error(ErrorKind::Shape, "depth map dimensions must be positive");
    }
    if (values_.size() != height_ * width_ || valid_.size() != height_ * width_) {
        throw Error(ErrorKind::Shape, "expected " + std::to_string(height_ * width_) +
                                          " values and mask entries, got " +
                                          std::to_string(values_.size()) + " and " +
                                          std::to_string(valid_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (valid_[i] != 0 && !std::isfinite(values_[i])) {
            throw Error(ErrorKind::Format,
                        "non-finite value at valid pixel " + std::to_string(i));
        }
    }
}

std::size_t DepthMap::valid_count() const {
    return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

std::vector<std::size_t> DepthMap::valid_indices() const {
    std::vector<std::size_t> out;
    out.reserve(values_.size());
    for (std::size_t i = 0; i < valid_.size(); ++i) {
        if (valid_[i] != 0) out.push_back(i);
    }
    return out;
}

DepthMap DepthMap::with_values(std::vector<double> values) const {
    return DepthMap(height_, width_, std::move(values), valid_);
}

DepthMap DepthMap::with_mask(Mask valid) const {
    return DepthMap(height_, width_, values_, std::move(valid));
}

DepthMap DepthMap::affine(double a, double b) const {
    std::vector<double> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [a, b](double v) { return a * v + b; });
    return DepthMap(height_, width_, std::move(out), valid_);
}

Mask joint_mask(const DepthMap& a, const DepthMap& b) {
    if (!a.same_shape(b)) {
        throw Error(ErrorKind::Shape, "maps differ in shape: " + std::to_string(a.height()) + "x" +
                                          std::to_string(a.width()) + " vs " +
                                          std::to_string(b.height()) + "x" +
                                          std::to_string(b.width()));
    }
    Mask out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (a.valid()[i] != 0 && b.valid()[i] != 0) ? 1 : 0;
    }
    return out;
}

}  // namespace hdn
