#include "mapdiff/experiment.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/hashing.hpp"
#include "mapdiff/stats.hpp"
#include "mapdiff/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace mapdiff {

namespace {

const char* const kSplitNames[] = {"train", "val", "test"};

fs::path cohort_dir(const ExperimentConfig& cfg) { return cfg.out / "cohort"; }
fs::path taus_path(const ExperimentConfig& cfg) { return cfg.out / "taus.json"; }
fs::path model_dir(const ExperimentConfig& cfg, const std::string& name) { return cfg.out / "models" / name; }
fs::path sample_dir(const ExperimentConfig& cfg, const std::string& name) { return cfg.out / "samples" / name; }
fs::path report_path(const ExperimentConfig& cfg) { return cfg.out / "report.json"; }

std::string subject_id(const char* split, int i) {
    std::ostringstream s;
    s << split << std::setw(2) << std::setfill('0') << i;
    return s.str();
}

fs::path dose_file(const fs::path& dir, Dose d) {
    return dir / ("dose_" + std::to_string(static_cast<int>(d)) + ".mdv");
}

nlohmann::json config_fingerprint(const ExperimentConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("out");
    j["eval"].erase("workers");
    return j;
}

void say(std::ostream* progress, const std::string& line) {
    if (progress) *progress << line << std::endl;
}

template <typename F>
auto run_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

nlohmann::json metric_json(const MetricReport& r) {
    return {{"psnr", r.psnr}, {"ssim", r.ssim}, {"nmae", r.nmae}};
}

nlohmann::json summary_json(const std::map<std::string, MetricSummary>& s) {
    nlohmann::json j;
    for (const auto& [k, v] : s) j[k] = {{"mean", v.mean}, {"std", v.std}};
    return j;
}

nlohmann::json per_subject_json(const std::vector<std::string>& ids, const std::vector<MetricReport>& reports) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = metric_json(reports[i]);
    return j;
}

}  // namespace

Cohort generate_cohort(const ExperimentConfig& cfg) {
    Cohort cohort;
    const int counts[] = {cfg.split.train, cfg.split.val, cfg.split.test};
    std::vector<MultiDoseSubject>* targets[] = {&cohort.train, &cohort.val, &cohort.test};
    int index = 0;
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < counts[s]; ++i, ++index) {
            PhantomSpec spec = cfg.phantom;
            spec.seed = cfg.phantom_seed(index);
            targets[s]->push_back(generate_subject(spec, subject_id(kSplitNames[s], i)));
        }
    }
    return cohort;
}

void write_cohort(const Cohort& cohort, const fs::path& dir) {
    nlohmann::json manifest = {{"subjects", nlohmann::json::array()}};
    const std::vector<MultiDoseSubject>* splits[] = {&cohort.train, &cohort.val, &cohort.test};
    for (int s = 0; s < 3; ++s) {
        for (const auto& subject : *splits[s]) {
            const fs::path sdir = dir / subject.id;
            fs::create_directories(sdir);
            for (Dose d : kDoseLadder) write_volume(subject.at(d), dose_file(sdir, d));
            write_mask(subject.mask, sdir / "mask.mdm");
            write_volume(subject.ground_truth, sdir / "ground_truth.mdv");
            manifest["subjects"].push_back({{"id", subject.id}, {"split", kSplitNames[s]}});
        }
    }
    write_json(dir / "cohort.json", manifest);
}

Cohort read_cohort(const fs::path& dir) {
    const auto manifest = read_json(dir / "cohort.json");
    Cohort cohort;
    for (const auto& entry : manifest.at("subjects")) {
        const auto id = entry.at("id").get<std::string>();
        const auto split = entry.at("split").get<std::string>();
        const fs::path sdir = dir / id;
        std::map<Dose, Volume> volumes;
        for (Dose d : kDoseLadder) volumes.emplace(d, read_volume(dose_file(sdir, d)));
        MultiDoseSubject subject{id, std::move(volumes), read_mask(sdir / "mask.mdm"),
                                 read_volume(sdir / "ground_truth.mdv")};
        if (split == "train")
            cohort.train.push_back(std::move(subject));
        else if (split == "val")
            cohort.val.push_back(std::move(subject));
        else if (split == "test")
            cohort.test.push_back(std::move(subject));
        else
            throw FormatError("unknown split '" + split + "' in cohort manifest");
    }
    return cohort;
}

MethodSpec baseline_method(const ExperimentConfig& cfg) {
    return MethodSpec{"baseline", cfg.anchors, cfg.train.weight, 0.0, true};
}

MethodSpec map_diff_method(const ExperimentConfig& cfg) {
    return MethodSpec{"map_diff", cfg.anchors, cfg.train.weight, cfg.train.lambda, false};
}

std::vector<MethodSpec> ablation_grid(const ExperimentConfig& cfg) {
    const WeightSchedule poly{WeightKind::poly, cfg.train.weight.p, cfg.train.weight.c};
    const WeightSchedule constant{WeightKind::constant, cfg.train.weight.p, cfg.train.weight.c};
    const double lambda = cfg.train.lambda;
    auto row = [&](std::string id, std::vector<Dose> doses, WeightSchedule w) {
        return MethodSpec{std::move(id), AnchorSet::with_intermediates(std::move(doses)), w, lambda, false};
    };
    const Dose a = Dose::tenth, b = Dose::quarter, c = Dose::half;
    std::vector<MethodSpec> grid{row("S1", {a, b, c}, poly), row("S2", {a, b}, poly), row("S3", {a, c}, poly),
                                 row("S4", {b, c}, poly),    row("S5", {a}, poly),    row("S6", {b}, poly),
                                 row("S7", {c}, poly),       row("S8", {a, b, c}, constant)};
    grid.push_back(baseline_method(cfg));
    return grid;
}

CalibrationResult run_calibration(const ExperimentConfig& cfg, const Cohort& cohort) {
    const double scale = compute_intensity_scale(cohort.train);
    return calibrate(cohort.train, cfg.anchors, cfg.noise_schedule(), cfg.calibration.sweep_stride,
                     cfg.calibration_seed(), scale);
}

TrainConfig method_train_config(const ExperimentConfig& cfg, const MethodSpec& method, const CalibrationResult& calib) {
    TrainConfig tc = cfg.train;
    tc.anchors = method.anchors;
    tc.weight = method.weight;
    tc.lambda = method.baseline ? 0.0 : method.lambda;
    tc.boundaries = calib.boundaries_for(method.anchors);
    tc.intensity_scale = calib.intensity_scale;
    tc.seed = cfg.train_seed();
    return tc;
}

TrainResult train_method(const ExperimentConfig& cfg, std::span<const MultiDoseSubject> subjects,
                         const MethodSpec& method, const CalibrationResult& calib, std::ostream* log,
                         const ProgressFn& progress) {
    const TrainConfig tc = method_train_config(cfg, method, calib);
    const auto sched = cfg.noise_schedule();
    TrainResult result = method.baseline
                             ? train<AnchorBranch::disabled>(subjects, tc, cfg.denoiser, sched, log, progress)
                             : train<AnchorBranch::enabled>(subjects, tc, cfg.denoiser, sched, log, progress);
    result.checkpoint.config["method"] = method.name;
    result.checkpoint.config["calibration_taus"] = calib.boundaries.taus;
    return result;
}

ProgressiveOutput sample_subject(const ExperimentConfig& cfg, const Denoiser<float>& net,
                                 const MultiDoseSubject& subject, const CalibrationResult& calib,
                                 double intensity_scale) {
    const Volume& y = subject.condition();
    const PatchGrid grid = make_patch_grid(y.dims(), cfg.eval.patch_size, cfg.eval.patch_stride);
    return sample_volume(net, y, grid, cfg.noise_schedule(), calib.boundaries.taus, intensity_scale,
                         cfg.sample_seed(subject.id), cfg.eval.workers);
}

void write_progressive(const fs::path& dir, const ProgressiveOutput& out, std::span<const int> taus) {
    fs::create_directories(dir);
    write_volume(out.final, dir / "final.mdv");
    for (std::size_t j = 0; j < taus.size(); ++j)
        write_volume(out.intermediates.at(taus[j]), dir / ("inter_tau" + std::to_string(j + 1) + ".mdv"));
}

ProgressiveOutput read_progressive(const fs::path& dir, std::span<const int> taus) {
    ProgressiveOutput out;
    out.final = read_volume(dir / "final.mdv");
    for (std::size_t j = 0; j < taus.size(); ++j)
        out.intermediates.emplace(taus[j], read_volume(dir / ("inter_tau" + std::to_string(j + 1) + ".mdv")));
    return out;
}

MethodEvaluation evaluate_outputs(const std::string& name, std::span<const MultiDoseSubject> subjects,
                                  std::span<const ProgressiveOutput> outputs, const CalibrationResult& calib,
                                  bool masked) {
    if (subjects.size() != outputs.size()) throw ConfigError("one output per subject is required");
    MethodEvaluation ev;
    ev.name = name;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto& s = subjects[i];
        const BodyMask m = masked ? s.mask : BodyMask::all(s.full().dims());
        ev.subjects.push_back(s.id);
        ev.final.push_back(evaluate_metrics(outputs[i].final, s.full(), m));
        for (std::size_t j = 0; j < calib.doses.size(); ++j) {
            const auto it = outputs[i].intermediates.find(calib.boundaries.taus[j]);
            if (it == outputs[i].intermediates.end()) continue;
            ev.stages[calib.doses[j]].push_back(evaluate_metrics(it->second, s.at(calib.doses[j]), m));
        }
    }
    return ev;
}

MethodEvaluation evaluate_input(std::span<const MultiDoseSubject> subjects, bool masked) {
    MethodEvaluation ev;
    ev.name = "input";
    for (const auto& s : subjects) {
        const BodyMask m = masked ? s.mask : BodyMask::all(s.full().dims());
        ev.subjects.push_back(s.id);
        ev.final.push_back(evaluate_metrics(s.condition(), s.full(), m));
    }
    return ev;
}

std::vector<double> metric_values(std::span<const MetricReport> reports, const std::string& metric) {
    std::vector<double> out;
    out.reserve(reports.size());
    for (const auto& r : reports) {
        if (metric == "psnr")
            out.push_back(r.psnr);
        else if (metric == "ssim")
            out.push_back(r.ssim);
        else if (metric == "nmae")
            out.push_back(r.nmae);
        else
            throw ConfigError("unknown metric " + metric);
    }
    return out;
}

std::map<std::string, MetricSummary> summarize(std::span<const MetricReport> reports) {
    std::map<std::string, MetricSummary> out;
    for (const char* metric : {"psnr", "ssim", "nmae"}) {
        const auto v = metric_values(reports, metric);
        MetricSummary s;
        if (!v.empty()) {
            double sum = 0.0;
            for (double x : v) sum += x;
            s.mean = sum / static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - s.mean) * (x - s.mean);
                s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
            }
        }
        out[metric] = s;
    }
    return out;
}

nlohmann::json build_report(const ExperimentConfig& cfg, const CalibrationResult& calib,
                            std::span<const MethodEvaluation> methods, const std::string& reference,
                            const std::string& input_hash) {
    nlohmann::json report;
    report["config"] = config_fingerprint(cfg);
    report["input_hash"] = input_hash;
    report["scale_note"] = "desk-scale synthetic phantoms; absolute values are not comparable to clinical results";

    nlohmann::json cal;
    cal["taus"] = calib.boundaries.taus;
    cal["doses"] = nlohmann::json::array();
    for (Dose d : calib.doses) cal["doses"].push_back(dose_label(d));
    for (Dose d : calib.doses) cal["mean_matches"][dose_label(d)] = calib.mean_match(d);
    cal["intensity_scale"] = calib.intensity_scale;
    report["calibration"] = cal;

    nlohmann::json table = nlohmann::json::object();
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& m : methods) {
        nlohmann::json entry;
        entry["per_subject"] = per_subject_json(m.subjects, m.final);
        entry["summary"] = summary_json(summarize(m.final));
        for (const auto& [dose, reports] : m.stages) {
            const auto summary = summarize(reports);
            entry["intermediates"][dose_label(dose)] = {{"tau", calib.tau_for(dose)},
                                                        {"per_subject", per_subject_json(m.subjects, reports)},
                                                        {"summary", summary_json(summary)}};
            stages.push_back({{"dose", dose_label(dose)},
                              {"tau", calib.tau_for(dose)},
                              {"method", m.name},
                              {"psnr", summary.at("psnr").mean},
                              {"ssim", summary.at("ssim").mean},
                              {"nmae", summary.at("nmae").mean}});
        }
        table[m.name] = entry;
    }
    report["methods"] = table;
    report["dose_stage_table"] = stages;

    nlohmann::json tests = nlohmann::json::object();
    const auto ref = std::find_if(methods.begin(), methods.end(), [&](const auto& m) { return m.name == reference; });
    if (ref != methods.end() && ref->final.size() >= 5 && methods.size() > 1) {
        for (const char* metric : {"psnr", "ssim", "nmae"}) {
            std::map<std::string, std::vector<double>> scores;
            for (const auto& m : methods) scores[m.name] = metric_values(m.final, metric);
            const auto adjusted = wilcoxon_holm(scores, reference);
            for (const auto& [name, p] : adjusted) {
                tests[metric][name] = {{"p_raw", wilcoxon_signed_rank(scores.at(reference), scores.at(name))},
                                       {"p_holm", p}};
            }
        }
        tests["reference"] = reference;
        tests["test"] = "two-sided Wilcoxon signed-rank, Holm-adjusted across methods";
    } else {
        tests["note"] = "fewer than 5 paired subjects; tests omitted";
    }
    report["tests"] = tests;
    return report;
}

std::string input_hash(const ExperimentConfig& cfg, const fs::path& dir) {
    Sha256 h;
    h.update(config_fingerprint(cfg).dump());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        h.update(fs::relative(f, dir).generic_string());
        h.update_file(f);
    }
    return h.hex_digest();
}

void stage_phantom(const ExperimentConfig& cfg) {
    run_stage("phantom", [&] { write_cohort(generate_cohort(cfg), cohort_dir(cfg)); });
}

CalibrationResult stage_calibrate(const ExperimentConfig& cfg) {
    return run_stage("calibrate", [&] {
        const Cohort cohort = read_cohort(cohort_dir(cfg));
        auto calib = run_calibration(cfg, cohort);
        write_json(taus_path(cfg), to_json(calib));
        return calib;
    });
}

void stage_train(const ExperimentConfig& cfg, const CalibrationResult& calib, const MethodSpec& method,
                 const fs::path& ckpt_path, std::ostream* progress) {
    run_stage("train", [&] {
        const Cohort cohort = read_cohort(cohort_dir(cfg));
        if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
        std::ofstream log(ckpt_path.parent_path() / "train_log.jsonl");
        const int every = std::max(1, cfg.train.steps / 20);
        auto report = [&](const StepRecord& r) {
            if (progress && (r.step % every == 0 || r.step + 1 == cfg.train.steps))
                *progress << method.name << " step " << r.step << " loss " << r.loss.total << std::endl;
        };
        auto result = train_method(cfg, cohort.train, method, calib, &log, report);
        save_checkpoint(result.checkpoint, ckpt_path);
    });
}

nlohmann::json stage_eval(const ExperimentConfig& cfg) {
    return run_stage("eval", [&] {
        const Cohort cohort = read_cohort(cohort_dir(cfg));
        const auto calib = calibration_from_json(read_json(taus_path(cfg)));
        std::vector<MethodEvaluation> evals{evaluate_input(cohort.test, cfg.eval.masked)};
        std::vector<std::string> names;
        if (fs::exists(cfg.out / "samples"))
            for (const auto& e : fs::directory_iterator(cfg.out / "samples"))
                if (e.is_directory()) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        for (const auto& name : names) {
            std::vector<ProgressiveOutput> outputs;
            for (const auto& s : cohort.test)
                outputs.push_back(read_progressive(sample_dir(cfg, name) / s.id, calib.boundaries.taus));
            evals.push_back(evaluate_outputs(name, cohort.test, outputs, calib, cfg.eval.masked));
        }
        const std::string reference =
            std::find(names.begin(), names.end(), "map_diff") != names.end() ? "map_diff"
            : names.empty()                                                  ? "input"
                                                                             : names.front();
        auto report = build_report(cfg, calib, evals, reference, input_hash(cfg, cohort_dir(cfg)));
        write_json(report_path(cfg), report);
        return report;
    });
}

PipelineResult run_full_pipeline(const ExperimentConfig& cfg, bool resume, std::ostream* progress) {
    PipelineResult result;
    fs::create_directories(cfg.out);
    const fs::path config_file = cfg.out / "config.json";
    const auto fingerprint = config_fingerprint(cfg);
    bool dirty = !resume || !fs::exists(config_file) || read_json(config_file) != fingerprint;
    write_json(config_file, fingerprint);

    auto mark = [&](const std::string& stage) {
        result.recomputed.push_back(stage);
        say(progress, "[" + stage + "] computed");
    };

    if (dirty || !fs::exists(cohort_dir(cfg) / "cohort.json")) {
        stage_phantom(cfg);
        dirty = true;
        mark("phantom");
    }
    CalibrationResult calib;
    if (dirty || !fs::exists(taus_path(cfg))) {
        calib = stage_calibrate(cfg);
        dirty = true;
        mark("calibrate");
    } else {
        calib = run_stage("calibrate", [&] { return calibration_from_json(read_json(taus_path(cfg))); });
    }

    bool eval_dirty = dirty;
    const Cohort cohort = run_stage("sample", [&] { return read_cohort(cohort_dir(cfg)); });
    for (const auto& method : {baseline_method(cfg), map_diff_method(cfg)}) {
        const fs::path ckpt_path = model_dir(cfg, method.name) / "ckpt.mdck";
        bool method_dirty = dirty;
        if (method_dirty || !fs::exists(ckpt_path)) {
            stage_train(cfg, calib, method, ckpt_path, progress);
            method_dirty = true;
            mark("train:" + method.name);
        }
        bool samples_present = true;
        for (const auto& s : cohort.test)
            samples_present = samples_present && fs::exists(sample_dir(cfg, method.name) / s.id / "final.mdv");
        if (method_dirty || !samples_present) {
            run_stage("sample", [&] {
                CheckpointRequirements req;
                req.steps = cfg.schedule.steps;
                req.anchors = method.anchors;
                const Checkpoint ckpt = load_checkpoint(ckpt_path, req);
                const Denoiser<float> net = denoiser_from_checkpoint(ckpt);
                const double scale = ckpt.config.at("intensity_scale").get<double>();
                for (const auto& s : cohort.test) {
                    const auto out = sample_subject(cfg, net, s, calib, scale);
                    write_progressive(sample_dir(cfg, method.name) / s.id, out, calib.boundaries.taus);
                }
            });
            eval_dirty = true;
            mark("sample:" + method.name);
        }
    }

    if (eval_dirty || !fs::exists(report_path(cfg))) {
        result.report = stage_eval(cfg);
        mark("eval");
    } else {
        result.report = run_stage("eval", [&] { return read_json(report_path(cfg)); });
    }
    return result;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const std::vector<std::string>& rows, bool resume,
                                      std::ostream* progress) {
    auto grid = ablation_grid(cfg);
    for (const auto& r : rows)
        if (std::none_of(grid.begin(), grid.end(), [&](const MethodSpec& m) { return m.name == r; }))
            throw ConfigError("unknown ablation row '" + r + "'");

    fs::create_directories(cfg.out);
    if (!resume || !fs::exists(cohort_dir(cfg) / "cohort.json")) stage_phantom(cfg);
    const CalibrationResult calib = (!resume || !fs::exists(taus_path(cfg)))
                                        ? stage_calibrate(cfg)
                                        : calibration_from_json(read_json(taus_path(cfg)));
    const Cohort cohort = read_cohort(cohort_dir(cfg));

    std::vector<AblationRow> out;
    for (const auto& method : grid) {
        if (!rows.empty() && std::find(rows.begin(), rows.end(), method.name) == rows.end()) continue;
        AblationRow row;
        row.method = method;
        const fs::path dir = cfg.out / "ablation" / method.name;
        const fs::path ckpt_path = dir / "ckpt.mdck";
        try {
            if (!resume || !fs::exists(ckpt_path)) stage_train(cfg, calib, method, ckpt_path, progress);
            const Checkpoint ckpt = load_checkpoint(ckpt_path);
            const Denoiser<float> net = denoiser_from_checkpoint(ckpt);
            const double scale = ckpt.config.at("intensity_scale").get<double>();
            for (const auto& s : cohort.test) {
                const PatchGrid pg = make_patch_grid(s.condition().dims(), cfg.eval.patch_size, cfg.eval.patch_stride);
                const auto sampled = sample_volume(net, s.condition(), pg, cfg.noise_schedule(), std::vector<int>{},
                                                   scale, cfg.sample_seed(s.id), cfg.eval.workers);
                const BodyMask m = cfg.eval.masked ? s.mask : BodyMask::all(s.full().dims());
                row.subjects.push_back(s.id);
                row.per_subject.push_back(evaluate_metrics(sampled.final, s.full(), m));
            }
            row.summary = summarize(row.per_subject);
        } catch (const StageError& e) {
            row.failed = true;
            row.error = e.what();
        } catch (const NumericError& e) {
            row.failed = true;
            row.error = e.what();
        }
        say(progress, "[ablate] " + method.name + (row.failed ? " failed: " + row.error : " done"));
        out.push_back(std::move(row));
    }
    write_json(cfg.out / "ablation.json", ablation_json(out));
    std::ofstream(cfg.out / "ablation.csv") << ablation_csv(out);
    return out;
}

nlohmann::json ablation_json(std::span<const AblationRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"set_id", r.method.name},
                            {"n_anchors", r.method.baseline ? 0 : r.method.anchors.intermediates().size()},
                            {"anchors", nlohmann::json::array()},
                            {"weighting", r.method.baseline ? "-" : (r.method.weight.kind == WeightKind::poly ? "Poly" : "Const")},
                            {"failed", r.failed}};
        if (!r.method.baseline)
            for (Dose d : r.method.anchors.intermediates()) j["anchors"].push_back(dose_label(d));
        if (r.failed)
            j["error"] = r.error;
        else {
            j["summary"] = summary_json(r.summary);
            j["per_subject"] = per_subject_json(r.subjects, r.per_subject);
        }
        out.push_back(j);
    }
    return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::ostringstream s;
    s << std::setprecision(6);
    s << "set_id,n_anchors,anchors,weighting,psnr_mean,psnr_std,ssim_mean,ssim_std,nmae_mean,nmae_std,status\n";
    for (const auto& r : rows) {
        std::string anchors;
        if (!r.method.baseline)
            for (Dose d : r.method.anchors.intermediates()) anchors += (anchors.empty() ? "" : " ") + dose_label(d);
        s << r.method.name << ',' << (r.method.baseline ? 0 : r.method.anchors.intermediates().size()) << ','
          << anchors << ','
          << (r.method.baseline ? "-" : (r.method.weight.kind == WeightKind::poly ? "Poly" : "Const"));
        for (const char* metric : {"psnr", "ssim", "nmae"}) {
            if (r.failed)
                s << ",,";
            else
                s << ',' << r.summary.at(metric).mean << ',' << r.summary.at(metric).std;
        }
        s << ',' << (r.failed ? "failed" : "ok") << '\n';
    }
    return s.str();
}

}  // namespace mapdiff
