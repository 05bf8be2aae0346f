#include "mapdiff/schedule.hpp"

#include <cmath>

namespace mapdiff {

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ConfigError("schedule needs T >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps_ = steps;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.beta_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    s.alpha_bar_.assign(static_cast<std::size_t>(steps) + 1, 1.0);
    for (int t = 1; t <= steps; ++t) {
        const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        const double b = beta_start + (beta_end - beta_start) * frac;
        s.beta_[static_cast<std::size_t>(t)] = b;
        s.alpha_bar_[static_cast<std::size_t>(t)] = s.alpha_bar_[static_cast<std::size_t>(t) - 1] * (1.0 - b);
    }
    return s;
}

double NoiseSchedule::posterior_variance(int t) const {
    return beta(t) * (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar(t));
}

double WeightSchedule::operator()(int t, int steps) const {
    if (kind == WeightKind::constant) return c;
    if (t < 0 || t > steps) throw ConfigError("weight timestep outside [0, T]");
    return std::pow(1.0 - static_cast<double>(t) / static_cast<double>(steps), p);
}

std::string weight_kind_name(WeightKind kind) { return kind == WeightKind::poly ? "poly" : "const"; }

WeightKind parse_weight_kind(const std::string& name) {
    if (name == "poly" || name == "Poly") return WeightKind::poly;
    if (name == "const" || name == "Const" || name == "constant") return WeightKind::constant;
    throw ConfigError("unknown weight kind '" + name + "'");
}

}  // namespace mapdiff
