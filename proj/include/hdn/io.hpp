#pragma once

#include <filesystem>
#include <optional>

#include "hdn/depth_map.hpp"

namespace hdn::io {

/// Reads a grayscale PFM ("Pf"). The returned map is all-valid and stored
/// top-to-bottom; byte order follows the sign of the scale field
/// (negative = little-endian).
DepthMap read_pfm(const std::filesystem::path& path);

/// Writes values as a little-endian grayscale PFM (scale -1). Invalid pixels
/// are written with their stored value; the mask goes to a separate PGM.
void write_pfm(const DepthMap& map, const std::filesystem::path& path);

/// Binary PGM ("P5", maxval 255). Nonzero bytes are valid.
Mask read_mask(const std::filesystem::path& path, std::size_t* height = nullptr,
               std::size_t* width = nullptr);
void write_mask(const Mask& mask, std::size_t height, std::size_t width,
                const std::filesystem::path& path);

/// Rectangular CSV of decimals; the token "nan" marks an invalid pixel.
DepthMap read_csv_map(const std::filesystem::path& path);
void write_csv_map(const DepthMap& map, const std::filesystem::path& path);

/// Dispatches on extension (.pfm or .csv) and applies an optional PGM mask,
/// which is ANDed with whatever validity the values file already carries.
DepthMap read_map(const std::filesystem::path& path,
                  const std::optional<std::filesystem::path>& mask_path = std::nullopt);

}  // namespace hdn::io
