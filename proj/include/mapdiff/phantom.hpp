#pragma once

#include "mapdiff/mask.hpp"
#include "mapdiff/volume.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace mapdiff {

struct PhantomSpec {
    Dims dims{32, 32, 32};
    std::array<float, 3> spacing{2.0f, 2.0f, 2.0f};
    std::uint64_t seed{0};
    int n_ellipsoids{4};
    int n_lesions{3};
    double background_activity{1.0};
    double lesion_activity{4.0};
    /// Expected full-dose counts per unit activity per voxel.
    double count_scale{300.0};

    void validate() const;
};

struct GroundTruth {
    Volume activity;
    BodyMask mask;
};

/// Noiseless activity field: a body ellipsoid at background activity, interior ellipsoids
/// modulating it by up to +-30%, and small spheres at lesion activity. Deterministic in
/// spec.seed.
[[nodiscard]] GroundTruth generate_ground_truth(const PhantomSpec& spec);

/// Image-space Poisson thinning: counts ~ Poisson(f * count_scale * gt), returned as
/// counts / (f * count_scale) so that the expectation equals gt.
[[nodiscard]] Volume simulate_dose(const Volume& gt, double fraction, double count_scale,
                                   std::uint64_t seed, Dose label = Dose::estimate);

struct MultiDoseSubject {
    std::string id;
    std::map<Dose, Volume> volumes;  // all five ladder levels
    BodyMask mask;                   // from the noiseless field, shared by all levels
    Volume ground_truth;             // QA only, never a training target

    [[nodiscard]] const Volume& at(Dose dose) const;
    [[nodiscard]] const Volume& full() const { return at(Dose::full); }
    [[nodiscard]] const Volume& condition() const { return at(Dose::twentieth); }
};

/// Ground truth plus one independent Poisson acquisition per ladder level.
[[nodiscard]] MultiDoseSubject generate_subject(const PhantomSpec& spec, std::string id = "subject");

}  // namespace mapdiff
