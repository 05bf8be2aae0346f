#include "mapdiff/patch.hpp"

#include "mapdiff/errors.hpp"

#include <algorithm>
#include <string>

namespace mapdiff {

std::vector<int> axis_origins(int extent, int patch_size, int stride) {
    if (patch_size < 1 || patch_size > extent)
        throw ConfigError("patch size " + std::to_string(patch_size) + " exceeds extent " +
                          std::to_string(extent));
    if (stride < 1 || stride > patch_size) throw ConfigError("stride must lie in [1, patch_size]");
    std::vector<int> out;
    for (int o = 0; o + patch_size <= extent; o += stride) out.push_back(o);
    if (out.back() + patch_size < extent) out.push_back(extent - patch_size);
    return out;
}

PatchGrid make_patch_grid(Dims dims, int patch_size, int stride) {
    PatchGrid grid{patch_size, stride, dims, {}};
    const auto oi = axis_origins(dims.h, patch_size, stride);
    const auto oj = axis_origins(dims.w, patch_size, stride);
    const auto ok = axis_origins(dims.d, patch_size, stride);
    grid.origins.reserve(oi.size() * oj.size() * ok.size());
    for (int i : oi)
        for (int j : oj)
            for (int k : ok) grid.origins.push_back({i, j, k});
    return grid;
}

std::vector<float> extract_patch(std::span<const float> data, Dims dims, const Origin& origin,
                                 int patch_size) {
    for (int axis = 0; axis < 3; ++axis)
        if (origin[axis] < 0 || origin[axis] + patch_size > dims[axis])
            throw ConfigError("patch origin out of bounds");
    const auto p = static_cast<std::size_t>(patch_size);
    std::vector<float> out(p * p * p);
    auto dst = out.begin();
    for (int i = 0; i < patch_size; ++i)
        for (int j = 0; j < patch_size; ++j) {
            const auto src = data.begin() +
                             static_cast<std::ptrdiff_t>(dims.index(origin[0] + i, origin[1] + j, origin[2]));
            dst = std::copy(src, src + patch_size, dst);
        }
    return out;
}

std::vector<float> extract_patch(const Volume& v, const Origin& origin, int patch_size) {
    return extract_patch(v.data(), v.dims(), origin, patch_size);
}

std::vector<std::vector<float>> extract_all(const Volume& v, const PatchGrid& grid) {
    std::vector<std::vector<float>> out;
    out.reserve(grid.origins.size());
    for (const auto& o : grid.origins) out.push_back(extract_patch(v, o, grid.patch_size));
    return out;
}

std::vector<float> stitch_patches(std::span<const std::vector<float>> patches, const PatchGrid& grid) {
    if (patches.size() != grid.origins.size()) throw ConfigError("patch count does not match grid");
    const Dims dims = grid.dims;
    std::vector<double> sum(dims.count(), 0.0);
    std::vector<int> hits(dims.count(), 0);
    const int p = grid.patch_size;
    for (std::size_t n = 0; n < patches.size(); ++n) {
        if (patches[n].size() != grid.patch_voxels()) throw ConfigError("patch buffer has wrong size");
        const auto& o = grid.origins[n];
        std::size_t src = 0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                for (int k = 0; k < p; ++k, ++src) {
                    const std::size_t idx = dims.index(o[0] + i, o[1] + j, o[2] + k);
                    sum[idx] += patches[n][src];
                    ++hits[idx];
                }
    }
    std::vector<float> out(dims.count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (hits[i] == 0) throw ConfigError("patch grid leaves voxels uncovered");
        out[i] = static_cast<float>(sum[i] / hits[i]);
    }
    return out;
}

Volume stitch_volume(std::span<const std::vector<float>> patches, const PatchGrid& grid,
                     std::array<float, 3> spacing, Dose dose) {
    return Volume(grid.dims, stitch_patches(patches, grid), spacing, dose);
}

}  // namespace mapdiff
