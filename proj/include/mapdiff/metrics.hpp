#pragma once

#include "mapdiff/mask.hpp"
#include "mapdiff/volume.hpp"

#include <cstddef>

namespace mapdiff {

/// PSNR reported for a zero-error pair; also the cap for any larger value.
inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 7;

/// Degradation of a volume relative to a reference: (NMAE, 1 - SSIM).
struct Signature {
    double nmae_component{0.0};
    double ssim_complement{0.0};

    [[nodiscard]] double distance(const Signature& other) const;
};

struct MetricReport {
    double psnr{0.0};
    double ssim{0.0};
    double nmae{0.0};
    std::size_t n_voxels_masked{0};
};

/// sum_m |a - ref| / sum_m |ref|.
[[nodiscard]] double nmae(const Volume& a, const Volume& ref, const BodyMask& m);

/// 10 log10(MAX^2 / MSE) with MAX the masked maximum of ref; capped at kPsnrCap.
[[nodiscard]] double psnr(const Volume& a, const Volume& ref, const BodyMask& m);

/// Mean local SSIM over masked window centres. Uniform 7^3 window clipped at the volume
/// border, C1 = (0.01 L)^2, C2 = (0.03 L)^2, L = masked maximum of ref. Windows may
/// include unmasked voxels.
[[nodiscard]] double ssim(const Volume& a, const Volume& ref, const BodyMask& m);

[[nodiscard]] Signature signature(const Volume& a, const Volume& ref, const BodyMask& m);

[[nodiscard]] MetricReport evaluate_metrics(const Volume& a, const Volume& ref, const BodyMask& m);

}  // namespace mapdiff
