#pragma once

#include "mapdiff/anchors.hpp"
#include "mapdiff/checkpoint.hpp"
#include "mapdiff/denoiser.hpp"
#include "mapdiff/patch.hpp"
#include "mapdiff/phantom.hpp"
#include "mapdiff/schedule.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"

namespace mapdiff {

struct TrainConfig {
    int steps{20000};
    int batch_size{8};
    double learning_rate{1e-4};
    double lambda{1.0};
    WeightSchedule weight{};
    AnchorSet anchors{};
    ZoneBoundaries boundaries{};
    int patch_size{16};
    int patch_stride{8};
    /// Affine normalization x -> scale * x applied to every dose level.
    double intensity_scale{1.0};
    std::uint64_t seed{0};
    double divergence_threshold{1e6};

    void validate(const NoiseSchedule& sched, const DenoiserConfig& net) const;
};

[[nodiscard]] nlohmann::json to_json(const TrainConfig& c);
/// Reads the optimisation fields; anchors/boundaries/scale come from elsewhere.
void update_from_json(TrainConfig& c, const nlohmann::json& j);

/// Compile-time switch for the anchor term; `disabled` is plain conditional DDPM.
enum class AnchorBranch { enabled, disabled };

/// Co-located patches for one optimisation step plus the per-element (t, eps) draws.
template <typename T>
struct TrainBatch {
    Dims patch{};
    std::vector<std::vector<T>> x0;                    // full dose
    std::vector<std::vector<T>> y;                     // 1/20 dose condition
    std::vector<std::vector<std::vector<T>>> anchors;  // [element][anchor j]
    std::vector<std::vector<std::uint8_t>> mask;
    std::vector<int> t;
    std::vector<std::vector<T>> eps;

    [[nodiscard]] std::size_t size() const { return x0.size(); }
};

struct LossBreakdown {
    double noise{0.0};
    double anchor{0.0};
    double total{0.0};
};

/// Mean of (eps - eps_pred)^2 over all elements.
template <typename T>
[[nodiscard]] double loss_noise(std::span<const T> eps, std::span<const T> eps_pred);

/// w(t) * mean of (x0_hat - anchor)^2.
template <typename T>
[[nodiscard]] double loss_anchor(std::span<const T> x0_hat, int t, std::span<const T> anchor,
                                 const WeightSchedule& ws, int steps);

/// L_noise + lambda * L_anch averaged over the batch. When grads is non-null the
/// parameter gradients of that total are accumulated into it.
template <typename T, AnchorBranch Branch = AnchorBranch::enabled>
[[nodiscard]] LossBreakdown total_loss(const Denoiser<T>& net, const TrainBatch<T>& batch,
                                       const NoiseSchedule& sched, const TrainConfig& cfg,
                                       ParamStore<T>* grads);

/// Draws subject, patch origin, timestep and noise for every batch element from a
/// per-step seed.
[[nodiscard]] TrainBatch<float> sample_batch(std::span<const MultiDoseSubject> cohort, const PatchGrid& grid,
                                             const NoiseSchedule& sched, const TrainConfig& cfg, int step);

/// 1 / (99.5th percentile of all full-dose voxels in the cohort).
[[nodiscard]] double compute_intensity_scale(std::span<const MultiDoseSubject> cohort);

class Adam {
public:
    Adam(const ParamStore<float>& like, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(ParamStore<float>& params, const ParamStore<float>& grads);
    [[nodiscard]] long steps_taken() const { return t_; }

private:
    ParamStore<float> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_{0};
};

struct StepRecord {
    int step{0};
    LossBreakdown loss;
    std::array<int, 10> t_hist{};
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<StepRecord> log;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Adam optimisation of the conditional denoiser on the MAP-Diff objective. Writes one
/// JSON line per step to `log` when given. Throws NumericError on divergence.
template <AnchorBranch Branch = AnchorBranch::enabled>
[[nodiscard]] TrainResult train(std::span<const MultiDoseSubject> cohort, const TrainConfig& cfg,
                                const DenoiserConfig& net_cfg, const NoiseSchedule& sched,
                                std::ostream* log = nullptr, const ProgressFn& progress = {});

[[nodiscard]] nlohmann::json step_record_json(const StepRecord& r);

/// Rebuilds a float denoiser from a checkpoint's parameters and config.
[[nodiscard]] Denoiser<float> denoiser_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mapdiff
