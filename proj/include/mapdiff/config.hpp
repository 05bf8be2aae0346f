#pragma once

#include "mapdiff/anchors.hpp"
#include "mapdiff/denoiser.hpp"
#include "mapdiff/phantom.hpp"
#include "mapdiff/schedule.hpp"
#include "mapdiff/trainer.hpp"

#include <cstdint>
#include <filesystem>

#include "json.hpp"

namespace mapdiff {

struct SplitSizes {
    int train{10};
    int val{2};
    int test{5};

    [[nodiscard]] int total() const { return train + val + test; }
};

struct ScheduleSettings {
    int steps{1000};
    double beta_start{1e-4};
    double beta_end{2e-2};
};

struct CalibrationSettings {
    int sweep_stride{1};
};

struct EvalSettings {
    int patch_size{16};
    int patch_stride{16};
    bool masked{true};
    int workers{1};
};

/// Everything a run needs; all per-stage seeds derive from `seed`.
struct ExperimentConfig {
    std::uint64_t seed{0};
    PhantomSpec phantom{};
    SplitSizes split{};
    ScheduleSettings schedule{};
    AnchorSet anchors{};
    CalibrationSettings calibration{};
    DenoiserConfig denoiser{};
    TrainConfig train{};
    EvalSettings eval{};
    std::filesystem::path out{"mapdiff_run"};
    bool deterministic{true};

    /// Cross-field checks; throws ConfigError.
    void validate() const;
    [[nodiscard]] NoiseSchedule noise_schedule() const;

    [[nodiscard]] std::uint64_t phantom_seed(int subject) const;
    [[nodiscard]] std::uint64_t calibration_seed() const;
    [[nodiscard]] std::uint64_t train_seed() const;
    [[nodiscard]] std::uint64_t sample_seed(const std::string& subject) const;
};

[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown top-level keys are rejected.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; writes to a temporary and renames.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace mapdiff
