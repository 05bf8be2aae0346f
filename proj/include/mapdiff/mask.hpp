#pragma once

#include "mapdiff/volume.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mapdiff {

/// Voxel selection over which metrics and degradation signatures are computed.
/// Always nonempty.
class BodyMask {
public:
    BodyMask() = default;
    BodyMask(Dims dims, std::vector<std::uint8_t> flags);

    /// Every voxel selected; used for unmasked evaluation.
    static BodyMask all(Dims dims);

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] std::span<const std::uint8_t> flags() const { return flags_; }
    [[nodiscard]] bool at(std::size_t index) const { return flags_[index] != 0; }
    [[nodiscard]] bool at(int i, int j, int k) const { return flags_[dims_.index(i, j, k)] != 0; }
    [[nodiscard]] std::size_t count() const { return count_; }

    friend bool operator==(const BodyMask& a, const BodyMask& b) {
        return a.dims_ == b.dims_ && a.flags_ == b.flags_;
    }

private:
    Dims dims_{};
    std::vector<std::uint8_t> flags_;
    std::size_t count_{0};
};

inline constexpr double kDefaultMaskThreshold = 0.1;

/// Threshold at `threshold * max(v)` and keep the largest 6-connected component.
/// Equal-sized components resolve to the one containing the lowest linear index.
[[nodiscard]] BodyMask compute_body_mask(const Volume& v, double threshold = kDefaultMaskThreshold);

/// Labels 6-connected components of `flags`; returns per-voxel labels (0 = background,
/// 1..n in order of first appearance) and writes the component sizes to `sizes`.
[[nodiscard]] std::vector<int> label_components(Dims dims, std::span<const std::uint8_t> flags,
                                                std::vector<std::size_t>& sizes);

}  // namespace mapdiff
