#include "mapdiff/config.hpp"

#include "mapdiff/errors.hpp"
#include <algorithm>
#include "mapdiff/rng.hpp"

#include <fstream>
#include <set>

namespace mapdiff {

namespace {

std::uint64_t string_tag(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

}  // namespace

void ExperimentConfig::validate() const {
    phantom.validate();
    if (split.train < 1 || split.val < 0 || split.test < 1) throw ConfigError("split needs >= 1 train and test subject");
    if (schedule.steps < 2) throw ConfigError("schedule.T must be >= 2");
    if (!(schedule.beta_start > 0.0 && schedule.beta_start < schedule.beta_end && schedule.beta_end < 1.0))
        throw ConfigError("schedule betas must satisfy 0 < beta_start < beta_end < 1");
    if (calibration.sweep_stride < 1) throw ConfigError("calibration.sweep_stride must be >= 1");
    denoiser.validate();
    for (Dose d : anchors.doses())
        if (std::find(kDoseLadder.begin(), kDoseLadder.end(), d) == kDoseLadder.end() || d == Dose::twentieth)
            throw ConfigError("anchor dose " + dose_label(d) + " is not an intermediate ladder level");
    const int multiple = denoiser.patch_multiple();
    if (train.patch_size % multiple != 0 || eval.patch_size % multiple != 0)
        throw ConfigError("patch sizes must be multiples of " + std::to_string(multiple) + " for this denoiser depth");
    if (train.patch_size > phantom.dims.min_extent() || eval.patch_size > phantom.dims.min_extent())
        throw ConfigError("patch size exceeds the phantom dims");
    if (eval.patch_stride < 1 || eval.patch_stride > eval.patch_size)
        throw ConfigError("eval.patch_stride must lie in [1, eval.patch_size]");
    if (eval.workers < 1) throw ConfigError("eval.workers must be >= 1");
    if (train.steps < 1 || train.batch_size < 1) throw ConfigError("train.steps and train.batch_size must be >= 1");
    if (!(train.learning_rate >= 0.0) || !(train.lambda >= 0.0))
        throw ConfigError("train.learning_rate and train.lambda must be >= 0");
    if (train.patch_stride < 1 || train.patch_stride > train.patch_size)
        throw ConfigError("train.patch_stride must lie in [1, train.patch_size]");
}

NoiseSchedule ExperimentConfig::noise_schedule() const {
    return linear_schedule(schedule.steps, schedule.beta_start, schedule.beta_end);
}

std::uint64_t ExperimentConfig::phantom_seed(int subject) const {
    return derive_seed(seed, {0x9a47, static_cast<std::uint64_t>(subject)});
}
std::uint64_t ExperimentConfig::calibration_seed() const { return derive_seed(seed, {0xca1b}); }
std::uint64_t ExperimentConfig::train_seed() const { return derive_seed(seed, {0x7a19}); }
std::uint64_t ExperimentConfig::sample_seed(const std::string& subject) const {
    return derive_seed(seed, {0x5a3d, string_tag(subject)});
}

nlohmann::json to_json(const ExperimentConfig& c) {
    const auto& p = c.phantom;
    nlohmann::json train = to_json(c.train);
    for (const char* k : {"anchors", "boundaries", "intensity_scale", "seed"}) train.erase(k);
    return {{"seed", c.seed},
            {"phantom",
             {{"dims", {p.dims.h, p.dims.w, p.dims.d}},
              {"spacing", p.spacing},
              {"n_ellipsoids", p.n_ellipsoids},
              {"n_lesions", p.n_lesions},
              {"background_activity", p.background_activity},
              {"lesion_activity", p.lesion_activity},
              {"count_scale", p.count_scale}}},
            {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
            {"schedule", {{"T", c.schedule.steps}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}}},
            {"anchors", c.anchors.labels()},
            {"calibration", {{"sweep_stride", c.calibration.sweep_stride}}},
            {"denoiser", to_json(c.denoiser)},
            {"train", train},
            {"eval",
             {{"patch_size", c.eval.patch_size},
              {"patch_stride", c.eval.patch_stride},
              {"masked", c.eval.masked},
              {"workers", c.eval.workers}}},
            {"out", c.out.string()},
            {"deterministic", c.deterministic}};
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"seed", "phantom", "split", "schedule", "anchors", "calibration", "denoiser", "train", "eval", "out",
                    "deterministic"},
                   "config");
    ExperimentConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("phantom")) {
            const auto& p = j.at("phantom");
            reject_unknown(p,
                           {"dims", "spacing", "n_ellipsoids", "n_lesions", "background_activity", "lesion_activity",
                            "count_scale"},
                           "phantom");
            if (p.contains("dims")) {
                const auto d = p.at("dims").get<std::vector<int>>();
                if (d.size() != 3) throw ConfigError("phantom.dims needs 3 entries");
                c.phantom.dims = Dims{d[0], d[1], d[2]};
            }
            c.phantom.spacing = p.value("spacing", c.phantom.spacing);
            c.phantom.n_ellipsoids = p.value("n_ellipsoids", c.phantom.n_ellipsoids);
            c.phantom.n_lesions = p.value("n_lesions", c.phantom.n_lesions);
            c.phantom.background_activity = p.value("background_activity", c.phantom.background_activity);
            c.phantom.lesion_activity = p.value("lesion_activity", c.phantom.lesion_activity);
            c.phantom.count_scale = p.value("count_scale", c.phantom.count_scale);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            reject_unknown(s, {"train", "val", "test"}, "split");
            c.split.train = s.value("train", c.split.train);
            c.split.val = s.value("val", c.split.val);
            c.split.test = s.value("test", c.split.test);
        }
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            reject_unknown(s, {"T", "beta_start", "beta_end"}, "schedule");
            c.schedule.steps = s.value("T", c.schedule.steps);
            c.schedule.beta_start = s.value("beta_start", c.schedule.beta_start);
            c.schedule.beta_end = s.value("beta_end", c.schedule.beta_end);
        }
        if (j.contains("anchors")) {
            std::vector<Dose> doses;
            for (const auto& label : j.at("anchors").get<std::vector<std::string>>()) doses.push_back(parse_dose(label));
            c.anchors = AnchorSet(std::move(doses));
        }
        if (j.contains("calibration")) {
            reject_unknown(j.at("calibration"), {"sweep_stride"}, "calibration");
            c.calibration.sweep_stride = j.at("calibration").value("sweep_stride", c.calibration.sweep_stride);
        }
        if (j.contains("denoiser")) {
            reject_unknown(j.at("denoiser"),
                           {"base_channels", "channel_mults", "time_embed_dim", "in_channels", "out_channels",
                            "norm_groups"},
                           "denoiser");
            c.denoiser = denoiser_config_from_json(j.at("denoiser"));
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t,
                           {"steps", "batch_size", "learning_rate", "lambda", "weight", "patch_size", "patch_stride",
                            "divergence_threshold"},
                           "train");
            if (t.contains("weight")) reject_unknown(t.at("weight"), {"kind", "p", "c"}, "train.weight");
            update_from_json(c.train, t);
        }
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            reject_unknown(e, {"patch_size", "patch_stride", "masked", "workers"}, "eval");
            c.eval.patch_size = e.value("patch_size", c.eval.patch_size);
            c.eval.patch_stride = e.value("patch_stride", c.eval.patch_stride);
            c.eval.masked = e.value("masked", c.eval.masked);
            c.eval.workers = e.value("workers", c.eval.workers);
        }
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        c.deterministic = j.value("deterministic", c.deterministic);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.train.anchors = c.anchors;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    try {
        return config_from_json(read_json(path));
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mapdiff
