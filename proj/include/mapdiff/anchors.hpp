#pragma once

#include "mapdiff/metrics.hpp"
#include "mapdiff/phantom.hpp"
#include "mapdiff/schedule.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mapdiff {

/// Ordered supervision anchors, lowest dose first; the last anchor is always full dose.
class AnchorSet {
public:
    AnchorSet() : AnchorSet(std::vector<Dose>{Dose::tenth, Dose::quarter, Dose::half, Dose::full}) {}
    explicit AnchorSet(std::vector<Dose> doses);

    /// Intermediate doses plus the implicit full-dose anchor.
    static AnchorSet with_intermediates(std::vector<Dose> intermediate);

    [[nodiscard]] const std::vector<Dose>& doses() const { return doses_; }
    [[nodiscard]] std::size_t size() const { return doses_.size(); }
    [[nodiscard]] Dose operator[](std::size_t j) const { return doses_[j]; }
    [[nodiscard]] std::vector<Dose> intermediates() const { return {doses_.begin(), doses_.end() - 1}; }
    [[nodiscard]] std::vector<std::string> labels() const;

    friend bool operator==(const AnchorSet&, const AnchorSet&) = default;

private:
    std::vector<Dose> doses_;
};

/// Zone boundaries tau_1 > tau_2 > ... >= 0, one fewer than the anchors.
struct ZoneBoundaries {
    std::vector<int> taus;

    void validate(int steps, std::size_t n_anchors) const;
    friend bool operator==(const ZoneBoundaries&, const ZoneBoundaries&) = default;
};

/// Zone index j (0 = lowest-dose anchor) with t in I_j: I_0 = [tau_1, T],
/// I_j = [tau_{j+1}, tau_j), I_{K-1} = [0, tau_{K-1}).
[[nodiscard]] std::size_t anchor_for_timestep(int t, const ZoneBoundaries& zones, int steps);

struct SweepEntry {
    int t{0};
    Signature sig;
};

/// Candidate timesteps 1, 1 + stride, ... <= T.
[[nodiscard]] std::vector<int> make_sweep(int steps, int stride);

/// d_sim(t) for every sweep timestep: signature of forward_sample(x0, t, eps) against x0,
/// one fixed-seed noise draw per timestep.
[[nodiscard]] std::vector<SweepEntry> simulate_signatures(const Volume& x0, const BodyMask& m,
                                                          const NoiseSchedule& sched,
                                                          std::span<const int> sweep, std::uint64_t seed);

/// Sweep timestep whose signature is closest (Euclidean) to `target`; ties go to the smaller t.
[[nodiscard]] int match_timestep(const Signature& target, std::span<const SweepEntry> table);

[[nodiscard]] int match_timestep(const Volume& anchor, const Volume& x0, const BodyMask& m,
                                 const NoiseSchedule& sched, std::span<const int> sweep,
                                 std::uint64_t seed);

struct CalibrationResult {
    std::vector<Dose> doses;                                  // intermediate anchors, lowest first
    std::map<std::string, std::map<Dose, int>> matches;       // subject -> dose -> t*
    std::map<std::string, std::map<Dose, Signature>> clinical;  // subject -> dose -> d_clin
    std::map<std::string, std::vector<SweepEntry>> signature_tables;
    ZoneBoundaries boundaries;
    int sweep_stride{1};
    std::uint64_t seed{0};
    double intensity_scale{1.0};

    [[nodiscard]] int tau_for(Dose dose) const;
    /// Boundaries restricted to the intermediate anchors of `subset`.
    [[nodiscard]] ZoneBoundaries boundaries_for(const AnchorSet& subset) const;
    [[nodiscard]] double mean_match(Dose dose) const;
};

/// Matches every intermediate anchor of every subject, then averages per dose and rounds
/// half up. Volumes are multiplied by `intensity_scale` first so that the diffusion
/// corruption is applied on the training scale. Throws NumericError when the averaged
/// boundaries are not strictly ordered by dose.
[[nodiscard]] CalibrationResult calibrate(std::span<const MultiDoseSubject> subjects,
                                          const AnchorSet& anchors, const NoiseSchedule& sched,
                                          int sweep_stride, std::uint64_t seed,
                                          double intensity_scale = 1.0);

/// Boundary aggregation alone: round-half-up of the per-dose mean over subjects.
[[nodiscard]] std::vector<int> aggregate_matches(const std::vector<std::vector<int>>& per_subject);

[[nodiscard]] nlohmann::json to_json(const CalibrationResult& r, bool with_tables = true);
[[nodiscard]] CalibrationResult calibration_from_json(const nlohmann::json& j);

}  // namespace mapdiff
