#include "mapdiff/volume.hpp"

#include "mapdiff/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mapdiff {

int Dims::min_extent() const { return std::min({h, w, d}); }

double dose_fraction(Dose dose) {
    switch (dose) {
        case Dose::full: return 1.0;
        case Dose::half: return 0.5;
        case Dose::quarter: return 0.25;
        case Dose::tenth: return 0.1;
        case Dose::twentieth: return 0.05;
        case Dose::estimate: break;
    }
    throw ConfigError("synthetic estimates have no dose fraction");
}

std::string dose_label(Dose dose) {
    switch (dose) {
        case Dose::full: return "full";
        case Dose::half: return "1/2";
        case Dose::quarter: return "1/4";
        case Dose::tenth: return "1/10";
        case Dose::twentieth: return "1/20";
        case Dose::estimate: return "estimate";
    }
    return "unknown";
}

Dose parse_dose(std::string_view label) {
    if (label == "full" || label == "1") return Dose::full;
    if (label == "1/2") return Dose::half;
    if (label == "1/4") return Dose::quarter;
    if (label == "1/10") return Dose::tenth;
    if (label == "1/20") return Dose::twentieth;
    if (label == "estimate") return Dose::estimate;
    throw ConfigError("unknown dose label '" + std::string(label) + "'");
}

std::optional<Dose> dose_from_code(std::uint8_t code) {
    switch (code) {
        case 0: return Dose::full;
        case 1: return Dose::half;
        case 2: return Dose::quarter;
        case 3: return Dose::tenth;
        case 4: return Dose::twentieth;
        case 255: return Dose::estimate;
        default: return std::nullopt;
    }
}

Volume::Volume(Dims dims, std::vector<float> data, std::array<float, 3> spacing, Dose dose)
    : dims_(dims), spacing_(spacing), dose_(dose), data_(std::move(data)) {
    if (!dims_.positive()) throw ConfigError("volume dims must be positive");
    if (data_.size() != dims_.count())
        throw ConfigError("volume payload length does not match dims");
    for (float v : data_)
        if (!std::isfinite(v)) throw NumericError("volume contains non-finite intensities");
}

Volume Volume::zeros(Dims dims, std::array<float, 3> spacing, Dose dose) {
    return Volume(dims, std::vector<float>(dims.count(), 0.0f), spacing, dose);
}

float Volume::max() const { return *std::max_element(data_.begin(), data_.end()); }

Volume Volume::scaled(float factor) const {
    std::vector<float> out(data_);
    for (float& v : out) v *= factor;
    return Volume(dims_, std::move(out), spacing_, dose_);
}

Volume Volume::with_dose(Dose dose) const {
    Volume out = *this;
    out.dose_ = dose;
    return out;
}

}  // namespace mapdiff
