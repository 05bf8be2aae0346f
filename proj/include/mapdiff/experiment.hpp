#pragma once

#include "mapdiff/anchors.hpp"
#include "mapdiff/checkpoint.hpp"
#include "mapdiff/config.hpp"
#include "mapdiff/metrics.hpp"
#include "mapdiff/phantom.hpp"
#include "mapdiff/sampler.hpp"
#include "mapdiff/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace mapdiff {

struct Cohort {
    std::vector<MultiDoseSubject> train, val, test;
};

[[nodiscard]] Cohort generate_cohort(const ExperimentConfig& cfg);
/// `<dir>/cohort.json` plus `<dir>/<id>/dose_<code>.mdv`, `mask.mdm`, `ground_truth.mdv`.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);
[[nodiscard]] Cohort read_cohort(const std::filesystem::path& dir);

/// One supervision design: anchors and weighting for the anchor term, or the plain
/// conditional DDPM baseline.
struct MethodSpec {
    std::string name;
    AnchorSet anchors;
    WeightSchedule weight;
    double lambda{1.0};
    bool baseline{false};
};

[[nodiscard]] MethodSpec baseline_method(const ExperimentConfig& cfg);
/// Configured anchors, weighting and lambda.
[[nodiscard]] MethodSpec map_diff_method(const ExperimentConfig& cfg);
/// Rows S1..S8 and "baseline", in table order.
[[nodiscard]] std::vector<MethodSpec> ablation_grid(const ExperimentConfig& cfg);

/// Normalization from the training split, then degradation matching on it.
[[nodiscard]] CalibrationResult run_calibration(const ExperimentConfig& cfg, const Cohort& cohort);

[[nodiscard]] TrainConfig method_train_config(const ExperimentConfig& cfg, const MethodSpec& method,
                                              const CalibrationResult& calib);
[[nodiscard]] TrainResult train_method(const ExperimentConfig& cfg, std::span<const MultiDoseSubject> subjects,
                                       const MethodSpec& method, const CalibrationResult& calib,
                                       std::ostream* log = nullptr, const ProgressFn& progress = {});

/// Samples one subject's 1/20 input, recording clean estimates at every calibrated boundary.
[[nodiscard]] ProgressiveOutput sample_subject(const ExperimentConfig& cfg, const Denoiser<float>& net,
                                               const MultiDoseSubject& subject, const CalibrationResult& calib,
                                               double intensity_scale);

/// final.mdv plus inter_tau<j>.mdv for the j-th boundary (1-based, tau_1 largest).
void write_progressive(const std::filesystem::path& dir, const ProgressiveOutput& out, std::span<const int> taus);
[[nodiscard]] ProgressiveOutput read_progressive(const std::filesystem::path& dir, std::span<const int> taus);

struct MethodEvaluation {
    std::string name;
    std::vector<std::string> subjects;
    std::vector<MetricReport> final;
    std::map<Dose, std::vector<MetricReport>> stages;  // intermediate at tau(dose) vs the real dose volume
};

[[nodiscard]] MethodEvaluation evaluate_outputs(const std::string& name, std::span<const MultiDoseSubject> subjects,
                                                std::span<const ProgressiveOutput> outputs,
                                                const CalibrationResult& calib, bool masked);
/// The raw 1/20 input scored against full dose.
[[nodiscard]] MethodEvaluation evaluate_input(std::span<const MultiDoseSubject> subjects, bool masked);

struct MetricSummary {
    double mean{0.0};
    double std{0.0};  // sample standard deviation
};

[[nodiscard]] std::map<std::string, MetricSummary> summarize(std::span<const MetricReport> reports);
[[nodiscard]] std::vector<double> metric_values(std::span<const MetricReport> reports, const std::string& metric);

/// Per-subject and cohort-level tables, intermediate dose-stage table, and Wilcoxon
/// signed-rank tests of every method against `reference` with Holm adjustment.
[[nodiscard]] nlohmann::json build_report(const ExperimentConfig& cfg, const CalibrationResult& calib,
                                          std::span<const MethodEvaluation> methods, const std::string& reference,
                                          const std::string& input_hash);

/// SHA-256 over the config (without its output path) and every cohort file.
[[nodiscard]] std::string input_hash(const ExperimentConfig& cfg, const std::filesystem::path& cohort_dir);

struct PipelineResult {
    nlohmann::json report;
    std::vector<std::string> recomputed;  // stage names in execution order
};

/// phantom -> calibrate -> train -> sample -> eval under cfg.out. With `resume`, stages
/// whose outputs exist and whose inputs were not recomputed are loaded instead.
/// Throws StageError naming the failing stage.
[[nodiscard]] PipelineResult run_full_pipeline(const ExperimentConfig& cfg, bool resume,
                                               std::ostream* progress = nullptr);

struct AblationRow {
    MethodSpec method;
    bool failed{false};
    std::string error;
    std::vector<std::string> subjects;
    std::vector<MetricReport> per_subject;
    std::map<std::string, MetricSummary> summary;
};

/// Trains and evaluates each requested row (all when `rows` is empty) on one shared
/// cohort and calibration. A diverging row is marked failed and the grid continues.
[[nodiscard]] std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const std::vector<std::string>& rows,
                                                    bool resume, std::ostream* progress = nullptr);

[[nodiscard]] nlohmann::json ablation_json(std::span<const AblationRow> rows);
[[nodiscard]] std::string ablation_csv(std::span<const AblationRow> rows);

// Individual stages behind the CLI subcommands; each reads and writes under cfg.out.
void stage_phantom(const ExperimentConfig& cfg);
[[nodiscard]] CalibrationResult stage_calibrate(const ExperimentConfig& cfg);
void stage_train(const ExperimentConfig& cfg, const CalibrationResult& calib, const MethodSpec& method,
                 const std::filesystem::path& ckpt_path, std::ostream* progress = nullptr);
[[nodiscard]] nlohmann::json stage_eval(const ExperimentConfig& cfg);

}  // namespace mapdiff
