#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mapdiff {

/// Grid extent (H, W, D). Storage is C order with D varying fastest.
struct Dims {
    int h{0};
    int w{0};
    int d{0};

    [[nodiscard]] std::size_t count() const {
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
               static_cast<std::size_t>(d);
    }
    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(w) +
                static_cast<std::size_t>(j)) *
                   static_cast<std::size_t>(d) +
               static_cast<std::size_t>(k);
    }
    [[nodiscard]] int operator[](int axis) const { return axis == 0 ? h : (axis == 1 ? w : d); }
    [[nodiscard]] int min_extent() const;
    [[nodiscard]] bool positive() const { return h > 0 && w > 0 && d > 0; }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dose levels of the acquisition ladder. The numeric values are the MDV1 dose codes.
enum class Dose : std::uint8_t {
    full = 0,
    half = 1,
    quarter = 2,
    tenth = 3,
    twentieth = 4,
    estimate = 255,
};

/// Measured ladder from the lowest dose (the conditioning input) to full dose.
inline constexpr std::array<Dose, 5> kDoseLadder{Dose::twentieth, Dose::tenth, Dose::quarter,
                                                 Dose::half, Dose::full};

[[nodiscard]] double dose_fraction(Dose dose);
[[nodiscard]] std::string dose_label(Dose dose);
/// Parses "1/20", "1/10", "1/4", "1/2", "full" (also "1"), or "estimate".
[[nodiscard]] Dose parse_dose(std::string_view label);
[[nodiscard]] std::optional<Dose> dose_from_code(std::uint8_t code);

/// A 3D scalar field. Construction validates the size and finiteness invariants;
/// the payload is immutable afterwards.
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, std::vector<float> data, std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f},
           Dose dose = Dose::estimate);

    static Volume zeros(Dims dims, std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f},
                        Dose dose = Dose::estimate);

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] const std::array<float, 3>& spacing() const { return spacing_; }
    [[nodiscard]] Dose dose() const { return dose_; }
    [[nodiscard]] std::span<const float> data() const { return data_; }
    [[nodiscard]] float at(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] float max() const;

    /// Copy with every voxel multiplied by `factor`.
    [[nodiscard]] Volume scaled(float factor) const;
    [[nodiscard]] Volume with_dose(Dose dose) const;

private:
    Dims dims_{};
    std::array<float, 3> spacing_{1.0f, 1.0f, 1.0f};
    Dose dose_{Dose::estimate};
    std::vector<float> data_;
};

}  // namespace mapdiff
