#include "mapdiff/phantom.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/rng.hpp"

#include <cmath>

namespace mapdiff {

namespace {

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> radii;

    [[nodiscard]] double level(double i, double j, double k) const {
        const double a = (i - center[0]) / radii[0];
        const double b = (j - center[1]) / radii[1];
        const double c = (k - center[2]) / radii[2];
        return a * a + b * b + c * c;
    }
    [[nodiscard]] bool contains(double i, double j, double k) const { return level(i, j, k) <= 1.0; }
};

constexpr int kLesionRetries = 1000;

}  // namespace

void PhantomSpec::validate() const {
    if (dims.min_extent() < 8) throw ConfigError("phantom dims must be >= 8 per axis");
    if (n_ellipsoids < 0 || n_lesions < 0) throw ConfigError("phantom structure counts must be >= 0");
    if (!(background_activity > 0.0)) throw ConfigError("background_activity must be positive");
    if (!(lesion_activity > background_activity))
        throw ConfigError("lesion_activity must exceed background_activity");
    if (!(count_scale > 0.0)) throw ConfigError("count_scale must be positive");
}

GroundTruth generate_ground_truth(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, {0x6a7}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const Dims dims = spec.dims;
    Ellipsoid body{};
    for (int a = 0; a < 3; ++a) {
        body.center[a] = 0.5 * (dims[a] - 1);
        body.radii[a] = 0.42 * dims[a] * uniform(0.9, 1.0);
    }

    std::vector<float> field(dims.count(), 0.0f);
    std::vector<std::uint8_t> inside(dims.count(), 0);
    for (int i = 0; i < dims.h; ++i)
        for (int j = 0; j < dims.w; ++j)
            for (int k = 0; k < dims.d; ++k)
                if (body.contains(i, j, k)) {
                    const auto idx = dims.index(i, j, k);
                    field[idx] = static_cast<float>(spec.background_activity);
                    inside[idx] = 1;
                }

    // Interior structures: centred well inside the body, clipped to it.
    for (int n = 0; n < spec.n_ellipsoids; ++n) {
        Ellipsoid e{};
        for (int a = 0; a < 3; ++a) {
            e.center[a] = body.center[a] + uniform(-0.5, 0.5) * body.radii[a];
            e.radii[a] = uniform(0.12, 0.35) * body.radii[a];
        }
        const double factor = uniform(0.7, 1.3);
        const auto value = static_cast<float>(spec.background_activity * factor);
        for (int i = 0; i < dims.h; ++i)
            for (int j = 0; j < dims.w; ++j)
                for (int k = 0; k < dims.d; ++k) {
                    const auto idx = dims.index(i, j, k);
                    if (inside[idx] && e.contains(i, j, k)) field[idx] = value;
                }
    }

    // Lesions: spheres on integer centres whose every voxel lies inside the body.
    for (int n = 0; n < spec.n_lesions; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < kLesionRetries && !placed; ++attempt) {
            const double radius = uniform(1.0, 2.0);
            std::array<int, 3> c{};
            for (int a = 0; a < 3; ++a)
                c[a] = static_cast<int>(std::lround(body.center[a] + uniform(-0.8, 0.8) * body.radii[a]));
            const int r = static_cast<int>(std::ceil(radius));
            std::vector<std::size_t> voxels;
            bool fits = true;
            for (int di = -r; di <= r && fits; ++di)
                for (int dj = -r; dj <= r && fits; ++dj)
                    for (int dk = -r; dk <= r && fits; ++dk) {
                        if (di * di + dj * dj + dk * dk > radius * radius) continue;
                        const int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
                        if (i < 0 || j < 0 || k < 0 || i >= dims.h || j >= dims.w || k >= dims.d ||
                            !inside[dims.index(i, j, k)]) {
                            fits = false;
                            break;
                        }
                        voxels.push_back(dims.index(i, j, k));
                    }
            if (!fits) continue;
            for (auto idx : voxels) field[idx] = static_cast<float>(spec.lesion_activity);
            placed = true;
        }
        if (!placed) throw ConfigError("could not place lesion inside the body");
    }

    Volume activity(dims, std::move(field), spec.spacing, Dose::estimate);
    BodyMask mask = compute_body_mask(activity);
    return GroundTruth{std::move(activity), std::move(mask)};
}

Volume simulate_dose(const Volume& gt, double fraction, double count_scale, std::uint64_t seed,
                     Dose label) {
    if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("dose fraction must lie in (0, 1]");
    if (!(count_scale > 0.0)) throw ConfigError("count_scale must be positive");
    const double scale = fraction * count_scale;
    Rng rng(seed);
    const auto src = gt.data();
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] < 0.0f) throw NumericError("ground truth must be nonnegative");
        const double mean = scale * static_cast<double>(src[i]);
        if (mean <= 0.0) {
            out[i] = 0.0f;
            continue;
        }
        std::poisson_distribution<long long> counts(mean);
        out[i] = static_cast<float>(static_cast<double>(counts(rng)) / scale);
    }
    return Volume(gt.dims(), std::move(out), gt.spacing(), label);
}

const Volume& MultiDoseSubject::at(Dose dose) const {
    const auto it = volumes.find(dose);
    if (it == volumes.end()) throw ConfigError("subject " + id + " has no " + dose_label(dose) + " volume");
    return it->second;
}

MultiDoseSubject generate_subject(const PhantomSpec& spec, std::string id) {
    GroundTruth gt = generate_ground_truth(spec);
    MultiDoseSubject subject{std::move(id), {}, gt.mask, gt.activity};
    for (Dose dose : kDoseLadder) {
        const auto seed = derive_seed(spec.seed, {0xd05e, static_cast<std::uint64_t>(dose)});
        subject.volumes.emplace(dose, simulate_dose(gt.activity, dose_fraction(dose), spec.count_scale,
                                                    seed, dose));
    }
    return subject;
}

}  // namespace mapdiff
