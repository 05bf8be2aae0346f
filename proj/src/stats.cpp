#include "mapdiff/stats.hpp"

#include "mapdiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mapdiff {

double wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ConfigError("paired samples must have equal length");
    std::vector<double> diff;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] - y[i] != 0.0) diff.push_back(x[i] - y[i]);
    const std::size_t n = diff.size();
    if (n == 0) return 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(diff[a]) < std::abs(diff[b]); });

    // Doubled midranks keep the exact distribution on an integer lattice.
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
        const long midrank2 = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = midrank2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }

    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (diff[i] > 0.0) w2 += rank2[i];

    if (n <= kWilcoxonExactLimit) {
        const long total2 = std::accumulate(rank2.begin(), rank2.end(), 0L);
        std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        long reach = 0;
        for (long r : rank2) {
            for (long s = reach; s >= 0; --s)
                if (ways[static_cast<std::size_t>(s)] != 0.0) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
            reach += r;
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double lower = 0.0, upper = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (s <= w2) lower += ways[static_cast<std::size_t>(s)];
            if (s >= w2) upper += ways[static_cast<std::size_t>(s)];
        }
        return std::min(1.0, 2.0 * std::min(lower, upper) / all);
    }

    const double nn = static_cast<double>(n);
    const double w = 0.5 * static_cast<double>(w2);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) return 1.0;
    const double dev = std::max(std::abs(w - mean) - 0.5, 0.0);
    return std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
}

std::vector<double> holm_adjust(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double scaled = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
        running = std::max(running, scaled);
        adjusted[order[k]] = running;
    }
    return adjusted;
}

std::map<std::string, double> wilcoxon_holm(const std::map<std::string, std::vector<double>>& scores,
                                            const std::string& reference) {
    const auto ref = scores.find(reference);
    if (ref == scores.end()) throw ConfigError("reference method '" + reference + "' has no scores");
    std::vector<std::string> names;
    std::vector<double> raw;
    for (const auto& [name, values] : scores) {
        if (name == reference) continue;
        if (values.size() != ref->second.size()) throw ConfigError("method '" + name + "' has unpaired scores");
        if (values.size() < 5) throw ConfigError("signed-rank test needs at least 5 paired samples");
        names.push_back(name);
        raw.push_back(wilcoxon_signed_rank(values, ref->second));
    }
    const auto adjusted = holm_adjust(raw);
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = adjusted[i];
    return out;
}

}  // namespace mapdiff
