#include "mapdiff/anchors.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mapdiff {

AnchorSet::AnchorSet(std::vector<Dose> doses) : doses_(std::move(doses)) {
    if (doses_.empty()) throw ConfigError("anchor set is empty");
    if (doses_.back() != Dose::full) throw ConfigError("the last anchor must be full dose");
    for (std::size_t j = 0; j < doses_.size(); ++j) {
        if (doses_[j] == Dose::estimate) throw ConfigError("anchors must be measured dose levels");
        if (j > 0 && !(dose_fraction(doses_[j]) > dose_fraction(doses_[j - 1])))
            throw ConfigError("anchor doses must be strictly increasing");
    }
}

AnchorSet AnchorSet::with_intermediates(std::vector<Dose> intermediate) {
    intermediate.push_back(Dose::full);
    return AnchorSet(std::move(intermediate));
}

std::vector<std::string> AnchorSet::labels() const {
    std::vector<std::string> out;
    for (Dose d : doses_) out.push_back(dose_label(d));
    return out;
}

void ZoneBoundaries::validate(int steps, std::size_t n_anchors) const {
    if (taus.size() + 1 != n_anchors)
        throw ConfigError("expected " + std::to_string(n_anchors - 1) + " boundaries, got " +
                          std::to_string(taus.size()));
    for (std::size_t j = 0; j < taus.size(); ++j) {
        if (taus[j] < 0 || taus[j] >= steps) throw ConfigError("boundary outside [0, T)");
        if (j > 0 && !(taus[j] < taus[j - 1])) throw ConfigError("boundaries must be strictly decreasing");
    }
}

std::size_t anchor_for_timestep(int t, const ZoneBoundaries& zones, int steps) {
    if (t < 0 || t > steps) throw ConfigError("timestep outside [0, T]");
    std::size_t j = 0;
    while (j < zones.taus.size() && t < zones.taus[j]) ++j;
    return j;
}

std::vector<int> make_sweep(int steps, int stride) {
    if (stride < 1) throw ConfigError("sweep stride must be >= 1");
    std::vector<int> sweep;
    for (int t = 1; t <= steps; t += stride) sweep.push_back(t);
    return sweep;
}

std::vector<SweepEntry> simulate_signatures(const Volume& x0, const BodyMask& m, const NoiseSchedule& sched,
                                            std::span<const int> sweep, std::uint64_t seed) {
    std::vector<SweepEntry> table;
    table.reserve(sweep.size());
    std::vector<float> eps(x0.size());
    for (int t : sweep) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        std::normal_distribution<float> normal;
        for (float& e : eps) e = normal(rng);
        auto xt = forward_sample<float>(x0.data(), t, eps, sched);
        const Volume noisy(x0.dims(), std::move(xt), x0.spacing(), Dose::estimate);
        table.push_back(SweepEntry{t, signature(noisy, x0, m)});
    }
    return table;
}

int match_timestep(const Signature& target, std::span<const SweepEntry> table) {
    if (table.empty()) throw ConfigError("empty timestep sweep");
    const SweepEntry* best = nullptr;
    double best_dist = 0.0;
    for (const auto& e : table) {
        const double dist = e.sig.distance(target);
        if (!best || dist < best_dist || (dist == best_dist && e.t < best->t)) {
            best = &e;
            best_dist = dist;
        }
    }
    return best->t;
}

int match_timestep(const Volume& anchor, const Volume& x0, const BodyMask& m, const NoiseSchedule& sched,
                   std::span<const int> sweep, std::uint64_t seed) {
    const auto table = simulate_signatures(x0, m, sched, sweep, seed);
    return match_timestep(signature(anchor, x0, m), table);
}

std::vector<int> aggregate_matches(const std::vector<std::vector<int>>& per_subject) {
    if (per_subject.empty()) throw ConfigError("calibration needs at least one subject");
    const std::size_t k = per_subject.front().size();
    std::vector<int> taus(k);
    for (std::size_t j = 0; j < k; ++j) {
        long sum = 0;
        for (const auto& row : per_subject) {
            if (row.size() != k) throw ConfigError("ragged calibration matches");
            sum += row[j];
        }
        const double mean = static_cast<double>(sum) / static_cast<double>(per_subject.size());
        taus[j] = static_cast<int>(std::floor(mean + 0.5));
    }
    return taus;
}

int CalibrationResult::tau_for(Dose dose) const {
    const auto it = std::find(doses.begin(), doses.end(), dose);
    if (it == doses.end()) throw ConfigError("no calibrated boundary for dose " + dose_label(dose));
    return boundaries.taus[static_cast<std::size_t>(std::distance(doses.begin(), it))];
}

ZoneBoundaries CalibrationResult::boundaries_for(const AnchorSet& subset) const {
    ZoneBoundaries out;
    for (Dose d : subset.intermediates()) out.taus.push_back(tau_for(d));
    return out;
}

double CalibrationResult::mean_match(Dose dose) const {
    double sum = 0.0;
    for (const auto& [id, per_dose] : matches) sum += per_dose.at(dose);
    return sum / static_cast<double>(matches.size());
}

CalibrationResult calibrate(std::span<const MultiDoseSubject> subjects, const AnchorSet& anchors,
                            const NoiseSchedule& sched, int sweep_stride, std::uint64_t seed,
                            double intensity_scale) {
    if (subjects.empty()) throw ConfigError("calibration needs at least one subject");
    const auto sweep = make_sweep(sched.steps(), sweep_stride);
    CalibrationResult result;
    result.doses = anchors.intermediates();
    result.sweep_stride = sweep_stride;
    result.seed = seed;
    result.intensity_scale = intensity_scale;

    const auto scale = static_cast<float>(intensity_scale);
    std::vector<std::vector<int>> per_subject;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
        const auto& subject = subjects[s];
        const Volume x0 = subject.full().scaled(scale);
        auto table = simulate_signatures(x0, subject.mask, sched, sweep,
                                         derive_seed(seed, {static_cast<std::uint64_t>(s)}));
        std::vector<int> row;
        for (Dose d : result.doses) {
            const Signature clin = signature(subject.at(d).scaled(scale), x0, subject.mask);
            const int t = match_timestep(clin, table);
            result.clinical[subject.id][d] = clin;
            result.matches[subject.id][d] = t;
            row.push_back(t);
        }
        result.signature_tables[subject.id] = std::move(table);
        per_subject.push_back(std::move(row));
    }

    result.boundaries.taus = result.doses.empty() ? std::vector<int>{} : aggregate_matches(per_subject);
    for (std::size_t j = 1; j < result.boundaries.taus.size(); ++j)
        if (!(result.boundaries.taus[j] < result.boundaries.taus[j - 1])) {
            std::ostringstream msg;
            msg << "calibrated boundaries are not strictly decreasing in dose (";
            for (std::size_t k = 0; k < result.doses.size(); ++k)
                msg << (k ? ", " : "") << dose_label(result.doses[k]) << ": " << result.boundaries.taus[k];
            msg << "); the phantom dose ladder is too flat for the sweep resolution";
            throw NumericError(msg.str());
        }
    result.boundaries.validate(sched.steps(), anchors.size());
    return result;
}

nlohmann::json to_json(const CalibrationResult& r, bool with_tables) {
    nlohmann::json j;
    j["taus"] = r.boundaries.taus;
    nlohmann::json doses = nlohmann::json::array();
    for (Dose d : r.doses) doses.push_back(dose_label(d));
    j["doses"] = doses;
    nlohmann::json matches = nlohmann::json::object();
    nlohmann::json clinical = nlohmann::json::object();
    for (const auto& [id, per_dose] : r.matches)
        for (const auto& [d, t] : per_dose) matches[id][dose_label(d)] = t;
    for (const auto& [id, per_dose] : r.clinical)
        for (const auto& [d, sig] : per_dose)
            clinical[id][dose_label(d)] = {sig.nmae_component, sig.ssim_complement};
    j["matches"] = matches;
    j["clinical_signatures"] = clinical;
    nlohmann::json means = nlohmann::json::object();
    if (!r.matches.empty())
        for (Dose d : r.doses) means[dose_label(d)] = r.mean_match(d);
    j["mean_matches"] = means;
    j["sweep_stride"] = r.sweep_stride;
    j["seed"] = r.seed;
    j["intensity_scale"] = r.intensity_scale;
    if (with_tables) {
        nlohmann::json tables = nlohmann::json::object();
        for (const auto& [id, table] : r.signature_tables) {
            auto& rows = tables[id] = nlohmann::json::array();
            for (const auto& e : table) rows.push_back({e.t, e.sig.nmae_component, e.sig.ssim_complement});
        }
        j["signature_tables"] = tables;
    }
    return j;
}

CalibrationResult calibration_from_json(const nlohmann::json& j) {
    try {
        CalibrationResult r;
        r.boundaries.taus = j.at("taus").get<std::vector<int>>();
        if (j.contains("doses")) {
            for (const auto& d : j.at("doses")) r.doses.push_back(parse_dose(d.get<std::string>()));
        } else {
            r.doses = AnchorSet().intermediates();
        }
        if (r.doses.size() != r.boundaries.taus.size())
            throw ConfigError("calibration doses and taus differ in length");
        if (j.contains("matches"))
            for (const auto& [id, per_dose] : j.at("matches").items())
                for (const auto& [d, t] : per_dose.items()) r.matches[id][parse_dose(d)] = t.get<int>();
        if (j.contains("clinical_signatures"))
            for (const auto& [id, per_dose] : j.at("clinical_signatures").items())
                for (const auto& [d, sig] : per_dose.items())
                    r.clinical[id][parse_dose(d)] = Signature{sig.at(0).get<double>(), sig.at(1).get<double>()};
        if (j.contains("signature_tables"))
            for (const auto& [id, rows] : j.at("signature_tables").items())
                for (const auto& row : rows)
                    r.signature_tables[id].push_back(
                        SweepEntry{row.at(0).get<int>(), Signature{row.at(1).get<double>(), row.at(2).get<double>()}});
        r.sweep_stride = j.value("sweep_stride", 1);
        r.seed = j.value("seed", std::uint64_t{0});
        r.intensity_scale = j.value("intensity_scale", 1.0);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed calibration JSON: ") + e.what());
    }
}

}  // namespace mapdiff
