#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace hdn {

/// Location of a pixel, both as (row, col) and as the row-major linear index.
struct PixelIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t linear = 0;

    bool operator==(const PixelIndex&) const = default;
};

inline std::size_t linearize(std::size_t row, std::size_t col, std::size_t width) {
    return row * width + col;
}

inline PixelIndex delinearize(std::size_t linear, std::size_t width) {
    return PixelIndex{linear / width, linear % width, linear};
}

using Mask = std::vector<std::uint8_t>;

/// Dense H x W map of depth (or disparity) values with a validity mask.
///
/// Values are unit-agnostic. The map is immutable once constructed; the
/// constructor rejects zero dimensions, size mismatches and non-finite values
/// at valid pixels.
class DepthMap {
public:
    DepthMap(std::size_t height, std::size_t width, std::vector<double> values);
    DepthMap(std::size_t height, std::size_t width, std::vector<double> values, Mask valid);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double at(std::size_t row, std::size_t col) const { return values_[linearize(row, col, width_)]; }
    double operator[](std::size_t linear) const { return values_[linear]; }
    bool is_valid(std::size_t linear) const { return valid_[linear] != 0; }

    std::span<const double> values() const { return values_; }
    const Mask& valid() const { return valid_; }

    /// Number of valid pixels (M).
    std::size_t valid_count() const;
    /// Linear indices of valid pixels in ascending order.
    std::vector<std::size_t> valid_indices() const;

    bool same_shape(const DepthMap& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    /// Copy with replaced values; the mask is kept.
    DepthMap with_values(std::vector<double> values) const;
    /// Copy with replaced mask; the values are kept.
    DepthMap with_mask(Mask valid) const;
    /// a * value + b at every pixel (invalid pixels included).
    DepthMap affine(double a, double b) const;

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<double> values_;
    Mask valid_;
};

/// Elementwise AND of two masks of equal length.
Mask joint_mask(const DepthMap& a, const DepthMap& b);

}  // namespace hdn
