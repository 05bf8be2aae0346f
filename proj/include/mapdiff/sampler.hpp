#pragma once

#include "mapdiff/denoiser.hpp"
#include "mapdiff/patch.hpp"
#include "mapdiff/schedule.hpp"
#include "mapdiff/volume.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace mapdiff {

/// eps_theta(x_t, t | y) on one patch.
using NoisePredictor =
    std::function<std::vector<float>(std::span<const float> xt, std::span<const float> y, int t)>;

/// Wraps a denoiser operating on cubic patches of the given dims.
[[nodiscard]] NoisePredictor denoiser_predictor(const Denoiser<float>& net, Dims patch, int steps);

struct PatchTrajectory {
    std::vector<float> final;
    std::map<int, std::vector<float>> intermediates;  // tau -> x0 estimate recorded at t = tau
};

struct ProgressiveOutput {
    Volume final;
    std::map<int, Volume> intermediates;
};

/// Taus must lie in [1, T]; throws ConfigError otherwise.
void validate_record_steps(std::span<const int> taus, int steps);

/// Full reverse trajectory from x_T ~ N(0, I) seeded by `seed`, recording the clean
/// estimate at every t in `taus`.
[[nodiscard]] PatchTrajectory sample_patch(const NoisePredictor& predict, std::span<const float> y_patch,
                                           const NoiseSchedule& sched, std::span<const int> taus,
                                           std::uint64_t seed);

/// Samples every grid patch of y (normalized by `intensity_scale`) with a seed derived from
/// the patch origin, stitches the final and each intermediate independently and maps the
/// results back to activity units. `workers` > 1 samples patches concurrently.
[[nodiscard]] ProgressiveOutput sample_volume(const NoisePredictor& predict, const Volume& y, const PatchGrid& grid,
                                              const NoiseSchedule& sched, std::span<const int> taus,
                                              double intensity_scale, std::uint64_t seed, int workers = 1);

[[nodiscard]] ProgressiveOutput sample_volume(const Denoiser<float>& net, const Volume& y, const PatchGrid& grid,
                                              const NoiseSchedule& sched, std::span<const int> taus,
                                              double intensity_scale, std::uint64_t seed, int workers = 1);

}  // namespace mapdiff
