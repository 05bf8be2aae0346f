#pragma once

#include "mapdiff/errors.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace mapdiff {

/// Linear-beta diffusion schedule. Tables are held in double and indexed by timestep
/// t in [0, T]; t = 0 is the clean state with alpha_bar(0) = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    [[nodiscard]] int steps() const { return steps_; }
    [[nodiscard]] double beta_start() const { return beta_start_; }
    [[nodiscard]] double beta_end() const { return beta_end_; }

    [[nodiscard]] double beta(int t) const { return beta_[checked(t, 1)]; }
    [[nodiscard]] double alpha(int t) const { return 1.0 - beta(t); }
    [[nodiscard]] double alpha_bar(int t) const { return alpha_bar_[checked(t, 0)]; }
    [[nodiscard]] double alpha_bar_prev(int t) const { return alpha_bar_[checked(t, 1) - 1]; }
    /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), the DDPM posterior variance.
    [[nodiscard]] double posterior_variance(int t) const;

    friend NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end);

private:
    [[nodiscard]] std::size_t checked(int t, int lowest) const {
        if (t < lowest || t > steps_)
            throw ConfigError("timestep " + std::to_string(t) + " outside [" + std::to_string(lowest) +
                              ", " + std::to_string(steps_) + "]");
        return static_cast<std::size_t>(t);
    }

    int steps_{0};
    double beta_start_{0.0};
    double beta_end_{0.0};
    std::vector<double> beta_;       // beta_[0] unused
    std::vector<double> alpha_bar_;  // alpha_bar_[0] = 1
};

[[nodiscard]] NoiseSchedule linear_schedule(int steps = 1000, double beta_start = 1e-4,
                                            double beta_end = 2e-2);

enum class WeightKind { poly, constant };

/// Anchor-loss timestep weight: (1 - t/T)^p, or a constant.
struct WeightSchedule {
    WeightKind kind{WeightKind::poly};
    double p{2.0};
    double c{1.0};

    [[nodiscard]] double operator()(int t, int steps) const;
};

[[nodiscard]] std::string weight_kind_name(WeightKind kind);
[[nodiscard]] WeightKind parse_weight_kind(const std::string& name);

namespace detail {
inline void require_same(std::size_t a, std::size_t b) {
    if (a != b) throw ConfigError("tensor shapes differ");
}
}  // namespace detail

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <typename T>
void forward_sample(std::span<const T> x0, int t, std::span<const T> eps, const NoiseSchedule& s,
                    std::span<T> out) {
    detail::require_same(x0.size(), eps.size());
    detail::require_same(x0.size(), out.size());
    if (t < 1) throw ConfigError("forward_sample needs t >= 1");
    const double ab = s.alpha_bar(t);
    const T a = static_cast<T>(std::sqrt(ab));
    const T b = static_cast<T>(std::sqrt(1.0 - ab));
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
}

template <typename T>
[[nodiscard]] std::vector<T> forward_sample(std::span<const T> x0, int t, std::span<const T> eps,
                                            const NoiseSchedule& s) {
    std::vector<T> out(x0.size());
    forward_sample<T>(x0, t, eps, s, out);
    return out;
}

/// (x_t - sqrt(1 - abar_t) eps_pred) / sqrt(abar_t).
template <typename T>
void predict_x0(std::span<const T> xt, int t, std::span<const T> eps_pred, const NoiseSchedule& s,
                std::span<T> out) {
    detail::require_same(xt.size(), eps_pred.size());
    detail::require_same(xt.size(), out.size());
    if (t < 1) throw ConfigError("predict_x0 needs t >= 1");
    const double ab = s.alpha_bar(t);
    const T inv = static_cast<T>(1.0 / std::sqrt(ab));
    const T b = static_cast<T>(std::sqrt(1.0 - ab));
    for (std::size_t i = 0; i < xt.size(); ++i) out[i] = inv * (xt[i] - b * eps_pred[i]);
}

template <typename T>
[[nodiscard]] std::vector<T> predict_x0(std::span<const T> xt, int t, std::span<const T> eps_pred,
                                        const NoiseSchedule& s) {
    std::vector<T> out(xt.size());
    predict_x0<T>(xt, t, eps_pred, s, out);
    return out;
}

/// One ancestral DDPM step x_t -> x_{t-1}; z must be all zero at t = 1.
template <typename T>
void reverse_step(std::span<const T> xt, int t, std::span<const T> eps_pred, std::span<const T> z,
                  const NoiseSchedule& s, std::span<T> out) {
    detail::require_same(xt.size(), eps_pred.size());
    detail::require_same(xt.size(), z.size());
    detail::require_same(xt.size(), out.size());
    if (t == 1)
        for (T v : z)
            if (v != T(0)) throw ConfigError("reverse_step at t = 1 requires z = 0");
    const T inv_sqrt_alpha = static_cast<T>(1.0 / std::sqrt(s.alpha(t)));
    const T eps_coef = static_cast<T>(s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t)));
    const T sigma = static_cast<T>(std::sqrt(s.posterior_variance(t)));
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = inv_sqrt_alpha * (xt[i] - eps_coef * eps_pred[i]) + sigma * z[i];
}

}  // namespace mapdiff
