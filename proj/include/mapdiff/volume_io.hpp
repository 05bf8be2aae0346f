#pragma once

#include "mapdiff/mask.hpp"
#include "mapdiff/volume.hpp"

#include <filesystem>

namespace mapdiff {

// MDV1: "MDV1", u32 H, W, D, f32 sx, sy, sz, u8 dose code, H*W*D f32 (D fastest).
// MDM1: "MDM1", u32 H, W, D, H*W*D bytes (0/1). All little-endian.

void write_volume(const Volume& v, const std::filesystem::path& path);
[[nodiscard]] Volume read_volume(const std::filesystem::path& path);

void write_mask(const BodyMask& m, const std::filesystem::path& path);
[[nodiscard]] BodyMask read_mask(const std::filesystem::path& path);

}  // namespace mapdiff
