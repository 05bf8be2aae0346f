#pragma once

#include "mapdiff/volume.hpp"

#include <array>
#include <span>
#include <vector>

namespace mapdiff {

using Origin = std::array<int, 3>;

/// Cubic patches of edge `patch_size` laid out with `stride`. Per axis the origins are
/// 0, S, 2S, ... and, when (dim - P) is not a multiple of S, one extra end-aligned
/// origin at dim - P so that every voxel is covered.
struct PatchGrid {
    int patch_size{0};
    int stride{0};
    Dims dims{};
    std::vector<Origin> origins;  // axis-0 major

    [[nodiscard]] std::size_t patch_voxels() const {
        const auto p = static_cast<std::size_t>(patch_size);
        return p * p * p;
    }
};

[[nodiscard]] std::vector<int> axis_origins(int extent, int patch_size, int stride);
[[nodiscard]] PatchGrid make_patch_grid(Dims dims, int patch_size, int stride);

/// Copies the P^3 block at `origin` out of a `dims`-shaped buffer.
[[nodiscard]] std::vector<float> extract_patch(std::span<const float> data, Dims dims,
                                               const Origin& origin, int patch_size);
[[nodiscard]] std::vector<float> extract_patch(const Volume& v, const Origin& origin, int patch_size);
[[nodiscard]] std::vector<std::vector<float>> extract_all(const Volume& v, const PatchGrid& grid);

/// Reassembles per-patch buffers (ordered as grid.origins) by uniform averaging of
/// overlapping contributions.
[[nodiscard]] std::vector<float> stitch_patches(std::span<const std::vector<float>> patches,
                                                const PatchGrid& grid);
[[nodiscard]] Volume stitch_volume(std::span<const std::vector<float>> patches, const PatchGrid& grid,
                                   std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f},
                                   Dose dose = Dose::estimate);

}  // namespace mapdiff
