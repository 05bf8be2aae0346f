#include "mapdiff/checkpoint.hpp"
#include "mapdiff/config.hpp"
#include "mapdiff/errors.hpp"
#include "mapdiff/experiment.hpp"
#include "mapdiff/sampler.hpp"
#include "mapdiff/trainer.hpp"
#include "mapdiff/volume_io.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace mapdiff;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool resume{false};
    bool deterministic{false};
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)");
    cmd->add_option("--seed", o.seed, "global seed override");
    cmd->add_option("--out", o.out, "output location");
    cmd->add_flag("--resume", o.resume, "reuse completed stage outputs");
    cmd->add_flag("--deterministic", o.deterministic, "force deterministic execution");
}

ExperimentConfig resolve(const CommonOptions& o, bool out_is_run_dir = true) {
    ExperimentConfig cfg = o.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (out_is_run_dir && !o.out.empty()) cfg.out = o.out;
    if (o.deterministic) {
        cfg.deterministic = true;
        cfg.eval.workers = 1;
    }
    cfg.validate();
    return cfg;
}

MethodSpec method_by_name(const ExperimentConfig& cfg, const std::string& name) {
    if (name == "map_diff") return map_diff_method(cfg);
    for (const auto& m : ablation_grid(cfg))
        if (m.name == name) return m;
    throw ConfigError("unknown method '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-anchor guided conditional diffusion for progressive volumetric denoising"};
    app.require_subcommand(1);

    CommonOptions phantom_o, calib_o, train_o, sample_o, eval_o, ablate_o, pipe_o;
    auto* phantom = app.add_subcommand("phantom", "generate the synthetic multi-dose cohort");
    add_common(phantom, phantom_o);

    auto* calibrate = app.add_subcommand("calibrate", "match anchor doses to diffusion timesteps");
    add_common(calibrate, calib_o);

    std::string train_calibration, train_method_name = "map_diff";
    auto* train = app.add_subcommand("train", "train one denoiser");
    add_common(train, train_o);
    train->add_option("--calibration", train_calibration, "calibration JSON (taus.json)")->required();
    train->add_option("--method", train_method_name, "map_diff, baseline or S1..S8");

    std::string sample_ckpt, sample_input, sample_calibration;
    auto* sample = app.add_subcommand("sample", "progressive reverse diffusion from a 1/20 dose volume");
    add_common(sample, sample_o);
    sample->add_option("--ckpt", sample_ckpt, "checkpoint")->required();
    sample->add_option("--input", sample_input, "ultra-low-dose volume (MDV1)")->required();
    sample->add_option("--calibration", sample_calibration, "calibration JSON (taus.json)")->required();

    auto* eval = app.add_subcommand("eval", "score sampled outputs and write report.json");
    add_common(eval, eval_o);

    std::vector<std::string> ablate_rows;
    auto* ablate = app.add_subcommand("ablate", "anchor-subset and weighting ablation grid");
    add_common(ablate, ablate_o);
    ablate->add_option("--rows", ablate_rows, "subset of S1..S8, baseline");

    auto* pipeline = app.add_subcommand("pipeline", "phantom, calibrate, train, sample, eval");
    add_common(pipeline, pipe_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*phantom) {
            const auto cfg = resolve(phantom_o);
            stage_phantom(cfg);
            std::cout << "cohort written to " << (cfg.out / "cohort").string() << '\n';
        } else if (*calibrate) {
            const auto cfg = resolve(calib_o);
            const auto calib = stage_calibrate(cfg);
            std::cout << "taus " << nlohmann::json(calib.boundaries.taus).dump() << '\n';
        } else if (*train) {
            const auto cfg = resolve(train_o, false);
            const auto calib = calibration_from_json(read_json(train_calibration));
            const fs::path ckpt = train_o.out.empty() ? cfg.out / "models" / train_method_name / "ckpt.mdck"
                                                      : fs::path(train_o.out);
            stage_train(cfg, calib, method_by_name(cfg, train_method_name), ckpt, &std::cerr);
            std::cout << "checkpoint written to " << ckpt.string() << '\n';
        } else if (*sample) {
            const auto cfg = resolve(sample_o, false);
            const auto calib = calibration_from_json(read_json(sample_calibration));
            CheckpointRequirements req;
            req.steps = cfg.schedule.steps;
            const Checkpoint ckpt = load_checkpoint(sample_ckpt, req);
            const Denoiser<float> net = denoiser_from_checkpoint(ckpt);
            const Volume y = read_volume(sample_input);
            const PatchGrid grid = make_patch_grid(y.dims(), cfg.eval.patch_size, cfg.eval.patch_stride);
            const auto scale = ckpt.config.at("intensity_scale").get<double>();
            const auto out = sample_volume(net, y, grid, cfg.noise_schedule(), calib.boundaries.taus, scale,
                                           cfg.sample_seed(fs::path(sample_input).stem().string()), cfg.eval.workers);
            const fs::path dir = sample_o.out.empty() ? fs::path("samples") : fs::path(sample_o.out);
            write_progressive(dir, out, calib.boundaries.taus);
            std::cout << "samples written to " << dir.string() << '\n';
        } else if (*eval) {
            const auto cfg = resolve(eval_o);
            const auto report = stage_eval(cfg);
            std::cout << report["methods"].dump(2) << '\n';
        } else if (*ablate) {
            const auto cfg = resolve(ablate_o);
            const auto rows = run_ablation(cfg, ablate_rows, ablate_o.resume, &std::cerr);
            std::cout << ablation_csv(rows);
        } else if (*pipeline) {
            const auto cfg = resolve(pipe_o);
            const auto result = run_full_pipeline(cfg, pipe_o.resume, &std::cerr);
            std::cout << "report written to " << (cfg.out / "report.json").string() << '\n';
            std::cout << result.report["dose_stage_table"].dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const StageError& e) {
        std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << '\n';
        return kExitStage;
    }
    return 0;
}
