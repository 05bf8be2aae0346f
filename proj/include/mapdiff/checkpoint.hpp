#pragma once

#include "mapdiff/anchors.hpp"
#include "mapdiff/tensor.hpp"

#include <filesystem>
#include <optional>

#include "json.hpp"

namespace mapdiff {

/// Trained parameters plus the configuration snapshot that produced them.
/// Expected config keys: "schedule" {T, beta_start, beta_end}, "anchors" [labels],
/// "boundaries" [taus], "denoiser" {...}, "train" {... patch_size ...},
/// "intensity_scale", "step", "rng_digest".
struct Checkpoint {
    ParamStore<float> params;
    nlohmann::json config = nlohmann::json::object();
};

/// Fields a run requires the checkpoint to agree with; unset fields are not checked.
struct CheckpointRequirements {
    std::optional<int> steps;
    std::optional<AnchorSet> anchors;
    std::optional<int> patch_size;
};

// MDCK: "MDCK", u32 tensor count, per tensor {u16 name length, name bytes, u8 rank,
// u32 dims[rank], f32 payload}, then u32 JSON length and UTF-8 JSON. Little-endian.

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path,
                                         const CheckpointRequirements& required = {});

/// Throws ConfigError naming the first incompatible field.
void check_compatible(const Checkpoint& ckpt, const CheckpointRequirements& required);

}  // namespace mapdiff
