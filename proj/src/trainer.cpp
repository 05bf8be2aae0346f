#include "mapdiff/trainer.hpp"

#include "mapdiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace mapdiff {

void TrainConfig::validate(const NoiseSchedule& sched, const DenoiserConfig& net) const {
    if (steps < 1) throw ConfigError("train.steps must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
    if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
    if (weight.kind == WeightKind::poly && !(weight.p > 0.0)) throw ConfigError("poly weight exponent must be > 0");
    if (patch_size < 1 || patch_size % net.patch_multiple() != 0)
        throw ConfigError("patch size must be a multiple of " + std::to_string(net.patch_multiple()));
    if (patch_stride < 1 || patch_stride > patch_size) throw ConfigError("patch stride must lie in [1, patch_size]");
    if (!(intensity_scale > 0.0)) throw ConfigError("intensity_scale must be positive");
    boundaries.validate(sched.steps(), anchors.size());
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"lambda", c.lambda},
            {"weight", {{"kind", weight_kind_name(c.weight.kind)}, {"p", c.weight.p}, {"c", c.weight.c}}},
            {"anchors", c.anchors.labels()},
            {"boundaries", c.boundaries.taus},
            {"patch_size", c.patch_size},
            {"patch_stride", c.patch_stride},
            {"intensity_scale", c.intensity_scale},
            {"seed", c.seed},
            {"divergence_threshold", c.divergence_threshold}};
}

void update_from_json(TrainConfig& c, const nlohmann::json& j) {
    try {
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.lambda = j.value("lambda", c.lambda);
        if (j.contains("weight")) {
            const auto& w = j.at("weight");
            c.weight.kind = parse_weight_kind(w.value("kind", weight_kind_name(c.weight.kind)));
            c.weight.p = w.value("p", c.weight.p);
            c.weight.c = w.value("c", c.weight.c);
        }
        c.patch_size = j.value("patch_size", c.patch_size);
        c.patch_stride = j.value("patch_stride", c.patch_stride);
        c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed train config: ") + e.what());
    }
}

template <typename T>
double loss_noise(std::span<const T> eps, std::span<const T> eps_pred) {
    detail::require_same(eps.size(), eps_pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = static_cast<double>(eps_pred[i]) - static_cast<double>(eps[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(eps.size());
}

template <typename T>
double loss_anchor(std::span<const T> x0_hat, int t, std::span<const T> anchor, const WeightSchedule& ws,
                   int steps) {
    detail::require_same(x0_hat.size(), anchor.size());
    const double w = ws(t, steps);
    double acc = 0.0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        const double d = static_cast<double>(x0_hat[i]) - static_cast<double>(anchor[i]);
        acc += d * d;
    }
    return w * acc / static_cast<double>(anchor.size());
}

template double loss_noise<float>(std::span<const float>, std::span<const float>);
template double loss_noise<double>(std::span<const double>, std::span<const double>);
template double loss_anchor<float>(std::span<const float>, int, std::span<const float>, const WeightSchedule&, int);
template double loss_anchor<double>(std::span<const double>, int, std::span<const double>, const WeightSchedule&, int);

template <typename T, AnchorBranch Branch>
LossBreakdown total_loss(const Denoiser<T>& net, const TrainBatch<T>& batch, const NoiseSchedule& sched,
                         const TrainConfig& cfg, ParamStore<T>* grads) {
    const std::size_t batch_size = batch.size();
    if (batch_size == 0) throw ConfigError("empty training batch");
    const std::size_t n = batch.patch.count();
    const int steps = sched.steps();
    const T grad_scale = static_cast<T>(2.0 / (static_cast<double>(batch_size) * static_cast<double>(n)));

    double sum_noise = 0.0;
    double sum_anchor = 0.0;
    typename Denoiser<T>::Cache cache;
    for (std::size_t e = 0; e < batch_size; ++e) {
        const int t = batch.t[e];
        const auto& eps = batch.eps[e];
        auto xt = forward_sample<T>(batch.x0[e], t, eps, sched);
        const Tensor<T> xt_tensor(1, batch.patch, xt);
        const Tensor<T> y_tensor(1, batch.patch, batch.y[e]);
        const Tensor<T> eps_pred = net.forward(xt_tensor, y_tensor, t, steps, grads ? &cache : nullptr);
        sum_noise += loss_noise<T>(eps, eps_pred.data);

        Tensor<T> dout;
        if (grads) {
            dout = Tensor<T>(1, batch.patch);
            for (std::size_t i = 0; i < n; ++i) dout.data[i] = grad_scale * (eps_pred.data[i] - eps[i]);
        }

        if constexpr (Branch == AnchorBranch::enabled) {
            const std::size_t zone = anchor_for_timestep(t, cfg.boundaries, steps);
            const auto& target = batch.anchors[e][zone];
            const auto x0_hat = predict_x0<T>(xt, t, eps_pred.data, sched);
            sum_anchor += loss_anchor<T>(x0_hat, t, target, cfg.weight, steps);
            if (grads) {
                // d x0_hat / d eps_pred = -sqrt(1 - abar) / sqrt(abar)
                const double ab = sched.alpha_bar(t);
                const T coef = static_cast<T>(cfg.lambda * cfg.weight(t, steps) * -std::sqrt((1.0 - ab) / ab)) *
                               grad_scale;
                for (std::size_t i = 0; i < n; ++i) dout.data[i] += coef * (x0_hat[i] - target[i]);
            }
        }

        if (grads) net.backward(cache, dout, *grads);
    }

    LossBreakdown out;
    out.noise = sum_noise / static_cast<double>(batch_size);
    out.anchor = sum_anchor / static_cast<double>(batch_size);
    if constexpr (Branch == AnchorBranch::enabled)
        out.total = out.noise + cfg.lambda * out.anchor;
    else
        out.total = out.noise;
    return out;
}

template LossBreakdown total_loss<float, AnchorBranch::enabled>(const Denoiser<float>&, const TrainBatch<float>&,
                                                                const NoiseSchedule&, const TrainConfig&,
                                                                ParamStore<float>*);
template LossBreakdown total_loss<float, AnchorBranch::disabled>(const Denoiser<float>&, const TrainBatch<float>&,
                                                                 const NoiseSchedule&, const TrainConfig&,
                                                                 ParamStore<float>*);
template LossBreakdown total_loss<double, AnchorBranch::enabled>(const Denoiser<double>&, const TrainBatch<double>&,
                                                                 const NoiseSchedule&, const TrainConfig&,
                                                                 ParamStore<double>*);
template LossBreakdown total_loss<double, AnchorBranch::disabled>(const Denoiser<double>&,
                                                                  const TrainBatch<double>&, const NoiseSchedule&,
                                                                  const TrainConfig&, ParamStore<double>*);

TrainBatch<float> sample_batch(std::span<const MultiDoseSubject> cohort, const PatchGrid& grid,
                               const NoiseSchedule& sched, const TrainConfig& cfg, int step) {
    if (cohort.empty()) throw ConfigError("training cohort is empty");
    Rng rng(derive_seed(cfg.seed, {0x57e9, static_cast<std::uint64_t>(step)}));
    std::uniform_int_distribution<std::size_t> pick_subject(0, cohort.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_origin(0, grid.origins.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, sched.steps());
    std::normal_distribution<float> normal;

    const int p = grid.patch_size;
    const auto scale = static_cast<float>(cfg.intensity_scale);
    auto scaled_patch = [&](const Volume& v, const Origin& o) {
        auto patch = extract_patch(v, o, p);
        for (float& x : patch) x *= scale;
        return patch;
    };

    TrainBatch<float> batch;
    batch.patch = Dims{p, p, p};
    for (int e = 0; e < cfg.batch_size; ++e) {
        const auto& subject = cohort[pick_subject(rng)];
        const Origin& o = grid.origins[pick_origin(rng)];
        batch.x0.push_back(scaled_patch(subject.full(), o));
        batch.y.push_back(scaled_patch(subject.condition(), o));
        std::vector<std::vector<float>> anchors;
        for (Dose d : cfg.anchors.doses()) anchors.push_back(scaled_patch(subject.at(d), o));
        batch.anchors.push_back(std::move(anchors));

        std::vector<std::uint8_t> mask;
        mask.reserve(grid.patch_voxels());
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                for (int k = 0; k < p; ++k) mask.push_back(subject.mask.at(o[0] + i, o[1] + j, o[2] + k) ? 1 : 0);
        batch.mask.push_back(std::move(mask));

        batch.t.push_back(pick_t(rng));
        std::vector<float> eps(grid.patch_voxels());
        for (float& x : eps) x = normal(rng);
        batch.eps.push_back(std::move(eps));
    }
    return batch;
}

double compute_intensity_scale(std::span<const MultiDoseSubject> cohort) {
    if (cohort.empty()) throw ConfigError("cannot normalise an empty cohort");
    std::vector<float> all;
    for (const auto& s : cohort) {
        const auto d = s.full().data();
        all.insert(all.end(), d.begin(), d.end());
    }
    const auto rank = static_cast<std::size_t>(std::floor(0.995 * static_cast<double>(all.size() - 1)));
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(rank), all.end());
    const double q = all[rank];
    if (!(q > 0.0)) throw NumericError("full-dose 99.5th percentile is not positive");
    return 1.0 / q;
}

Adam::Adam(const ParamStore<float>& like, double lr, double beta1, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore<float>& params, const ParamStore<float>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const auto step_size = static_cast<float>(lr_ / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto eps = static_cast<float>(eps_);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p].value;
        const auto& g = grads[p].value;
        auto& m = m_[p].value;
        auto& v = v_[p].value;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
}

nlohmann::json step_record_json(const StepRecord& r) {
    return {{"step", r.step},
            {"loss_noise", r.loss.noise},
            {"loss_anch", r.loss.anchor},
            {"loss", r.loss.total},
            {"t_hist", r.t_hist}};
}

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

}  // namespace

template <AnchorBranch Branch>
TrainResult train(std::span<const MultiDoseSubject> cohort, const TrainConfig& cfg, const DenoiserConfig& net_cfg,
                  const NoiseSchedule& sched, std::ostream* log, const ProgressFn& progress) {
    cfg.validate(sched, net_cfg);
    if (cohort.empty()) throw ConfigError("training cohort is empty");
    const Dims dims = cohort.front().full().dims();
    for (const auto& s : cohort)
        if (s.full().dims() != dims) throw ConfigError("training subjects must share dims");

    Denoiser<float> net(net_cfg, derive_seed(cfg.seed, {0x1417}));
    const PatchGrid grid = make_patch_grid(dims, cfg.patch_size, cfg.patch_stride);
    Adam adam(net.params(), cfg.learning_rate);
    ParamStore<float> grads = net.params().zeros_like();

    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        const auto batch = sample_batch(cohort, grid, sched, cfg, step);
        grads.fill_zero();
        const LossBreakdown loss = total_loss<float, Branch>(net, batch, sched, cfg, &grads);
        StepRecord rec{step, loss, {}};
        for (int t : batch.t)
            ++rec.t_hist[static_cast<std::size_t>(std::min(9, (t - 1) * 10 / sched.steps()))];
        if (log) *log << step_record_json(rec).dump() << '\n';
        if (!std::isfinite(loss.total) || loss.total > cfg.divergence_threshold) {
            if (log) log->flush();
            std::ostringstream msg;
            msg << "training diverged at step " << step << " (loss " << loss.total << ")";
            throw NumericError(msg.str());
        }
        adam.step(net.params(), grads);
        result.log.push_back(rec);
        if (progress) progress(rec);
    }

    Checkpoint& ckpt = result.checkpoint;
    ckpt.params = net.params();
    ckpt.config = {{"schedule", {{"T", sched.steps()}, {"beta_start", sched.beta_start()}, {"beta_end", sched.beta_end()}}},
                   {"anchors", cfg.anchors.labels()},
                   {"boundaries", cfg.boundaries.taus},
                   {"denoiser", to_json(net_cfg)},
                   {"train", to_json(cfg)},
                   {"intensity_scale", cfg.intensity_scale},
                   {"step", cfg.steps},
                   {"anchor_branch", Branch == AnchorBranch::enabled ? "enabled" : "disabled"},
                   {"rng_digest", hex64(derive_seed(cfg.seed, {0x57e9, static_cast<std::uint64_t>(cfg.steps)}))}};
    return result;
}

template TrainResult train<AnchorBranch::enabled>(std::span<const MultiDoseSubject>, const TrainConfig&,
                                                  const DenoiserConfig&, const NoiseSchedule&, std::ostream*,
                                                  const ProgressFn&);
template TrainResult train<AnchorBranch::disabled>(std::span<const MultiDoseSubject>, const TrainConfig&,
                                                   const DenoiserConfig&, const NoiseSchedule&, std::ostream*,
                                                   const ProgressFn&);

Denoiser<float> denoiser_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.config.contains("denoiser")) throw ConfigError("checkpoint lacks a denoiser config");
    Denoiser<float> net(denoiser_config_from_json(ckpt.config.at("denoiser")), 0);
    net.set_params(ckpt.params);
    return net;
}

}  // namespace mapdiff
