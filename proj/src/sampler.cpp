#include "mapdiff/sampler.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace mapdiff {

NoisePredictor denoiser_predictor(const Denoiser<float>& net, Dims patch, int steps) {
    return [&net, patch, steps](std::span<const float> xt, std::span<const float> y, int t) {
        const Tensor<float> xt_tensor(1, patch, std::vector<float>(xt.begin(), xt.end()));
        const Tensor<float> y_tensor(1, patch, std::vector<float>(y.begin(), y.end()));
        return net.forward(xt_tensor, y_tensor, t, steps).data;
    };
}

void validate_record_steps(std::span<const int> taus, int steps) {
    for (int tau : taus)
        if (tau < 1 || tau > steps)
            throw ConfigError("recording step " + std::to_string(tau) + " outside [1, " + std::to_string(steps) + "]");
}

namespace {

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

PatchTrajectory sample_patch(const NoisePredictor& predict, std::span<const float> y_patch,
                             const NoiseSchedule& sched, std::span<const int> taus, std::uint64_t seed) {
    validate_record_steps(taus, sched.steps());
    const std::size_t n = y_patch.size();
    Rng rng(seed);
    std::normal_distribution<float> normal;
    std::vector<float> x(n), z(n), next(n);
    for (float& v : x) v = normal(rng);

    PatchTrajectory out;
    for (int t = sched.steps(); t >= 1; --t) {
        const auto eps = predict(x, y_patch, t);
        if (eps.size() != n) throw ConfigError("noise predictor returned the wrong size");
        if (!all_finite(eps)) throw NumericError("non-finite noise prediction at step " + std::to_string(t));
        if (std::find(taus.begin(), taus.end(), t) != taus.end())
            out.intermediates[t] = predict_x0<float>(x, t, eps, sched);
        if (t > 1)
            for (float& v : z) v = normal(rng);
        else
            std::fill(z.begin(), z.end(), 0.0f);
        reverse_step<float>(x, t, eps, z, sched, next);
        if (!all_finite(next)) throw NumericError("non-finite sampler state at step " + std::to_string(t));
        std::swap(x, next);
    }
    out.final = std::move(x);
    return out;
}

ProgressiveOutput sample_volume(const NoisePredictor& predict, const Volume& y, const PatchGrid& grid,
                                const NoiseSchedule& sched, std::span<const int> taus, double intensity_scale,
                                std::uint64_t seed, int workers) {
    validate_record_steps(taus, sched.steps());
    if (grid.dims != y.dims()) throw ConfigError("patch grid does not match the input volume");
    if (!(intensity_scale > 0.0)) throw ConfigError("intensity_scale must be positive");

    const std::size_t n_patches = grid.origins.size();
    std::vector<PatchTrajectory> results(n_patches);
    const auto scale = static_cast<float>(intensity_scale);

    auto run_one = [&](std::size_t i) {
        const Origin& o = grid.origins[i];
        auto patch = extract_patch(y, o, grid.patch_size);
        for (float& v : patch) v *= scale;
        const auto patch_seed = derive_seed(seed, {static_cast<std::uint64_t>(o[0]), static_cast<std::uint64_t>(o[1]),
                                                   static_cast<std::uint64_t>(o[2])});
        results[i] = sample_patch(predict, patch, sched, taus, patch_seed);
    };

    const auto n_workers = static_cast<std::size_t>(std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(n_patches, 1))));
    if (n_workers == 1) {
        for (std::size_t i = 0; i < n_patches; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n_patches; i = next++) {
                    try {
                        run_one(i);
                    } catch (...) {
                        const std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = n_patches;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    auto to_activity = [&](std::vector<std::vector<float>> patches) {
        Volume v = stitch_volume(patches, grid, y.spacing(), Dose::estimate);
        return v.scaled(1.0 / intensity_scale);
    };

    ProgressiveOutput out;
    std::vector<std::vector<float>> finals;
    finals.reserve(n_patches);
    for (auto& r : results) finals.push_back(std::move(r.final));
    out.final = to_activity(std::move(finals));
    for (int tau : taus) {
        std::vector<std::vector<float>> level;
        level.reserve(n_patches);
        for (auto& r : results) level.push_back(std::move(r.intermediates.at(tau)));
        out.intermediates.emplace(tau, to_activity(std::move(level)));
    }
    return out;
}

ProgressiveOutput sample_volume(const Denoiser<float>& net, const Volume& y, const PatchGrid& grid,
                                const NoiseSchedule& sched, std::span<const int> taus, double intensity_scale,
                                std::uint64_t seed, int workers) {
    const Dims patch{grid.patch_size, grid.patch_size, grid.patch_size};
    return sample_volume(denoiser_predictor(net, patch, sched.steps()), y, grid, sched, taus, intensity_scale, seed,
                         workers);
}

}  // namespace mapdiff
