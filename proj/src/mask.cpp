#include "mapdiff/mask.hpp"

#include "mapdiff/errors.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace mapdiff {

BodyMask::BodyMask(Dims dims, std::vector<std::uint8_t> flags)
    : dims_(dims), flags_(std::move(flags)) {
    if (flags_.size() != dims_.count()) throw ConfigError("mask length does not match dims");
    for (auto& f : flags_) f = f ? 1 : 0;
    count_ = static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
    if (count_ == 0) throw ConfigError("body mask is empty");
}

BodyMask BodyMask::all(Dims dims) { return BodyMask(dims, std::vector<std::uint8_t>(dims.count(), 1)); }

std::vector<int> label_components(Dims dims, std::span<const std::uint8_t> flags,
                                  std::vector<std::size_t>& sizes) {
    std::vector<int> labels(dims.count(), 0);
    sizes.clear();
    std::vector<std::size_t> stack;
    constexpr std::array<std::array<int, 3>, 6> kNeighbours{
        {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

    for (std::size_t seed = 0; seed < flags.size(); ++seed) {
        if (!flags[seed] || labels[seed] != 0) continue;
        const int label = static_cast<int>(sizes.size()) + 1;
        std::size_t size = 0;
        labels[seed] = label;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            ++size;
            const int k = static_cast<int>(idx % static_cast<std::size_t>(dims.d));
            const int j = static_cast<int>((idx / static_cast<std::size_t>(dims.d)) %
                                           static_cast<std::size_t>(dims.w));
            const int i = static_cast<int>(idx / (static_cast<std::size_t>(dims.d) *
                                                  static_cast<std::size_t>(dims.w)));
            for (const auto& n : kNeighbours) {
                const int ni = i + n[0], nj = j + n[1], nk = k + n[2];
                if (ni < 0 || nj < 0 || nk < 0 || ni >= dims.h || nj >= dims.w || nk >= dims.d)
                    continue;
                const std::size_t nidx = dims.index(ni, nj, nk);
                if (flags[nidx] && labels[nidx] == 0) {
                    labels[nidx] = label;
                    stack.push_back(nidx);
                }
            }
        }
        sizes.push_back(size);
    }
    return labels;
}

BodyMask compute_body_mask(const Volume& v, double threshold) {
    const float peak = v.max();
    if (!(peak > 0.0f)) throw ConfigError("cannot build a body mask from a volume with no positive voxel");
    const double cut = threshold * static_cast<double>(peak);

    std::vector<std::uint8_t> above(v.size(), 0);
    const auto data = v.data();
    for (std::size_t i = 0; i < data.size(); ++i) above[i] = static_cast<double>(data[i]) >= cut ? 1 : 0;

    std::vector<std::size_t> sizes;
    const auto labels = label_components(v.dims(), above, sizes);
    const auto largest = std::max_element(sizes.begin(), sizes.end());
    const int keep = static_cast<int>(std::distance(sizes.begin(), largest)) + 1;

    std::vector<std::uint8_t> flags(v.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] == keep ? 1 : 0;
    return BodyMask(v.dims(), std::move(flags));
}

}  // namespace mapdiff
