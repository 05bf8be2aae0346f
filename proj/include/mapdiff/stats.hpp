#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mapdiff {

/// Largest number of nonzero differences evaluated with the exact null distribution.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero differences are
/// dropped and tied magnitudes receive midranks. Up to kWilcoxonExactLimit nonzero
/// differences the exact permutation distribution is used, above it the normal
/// approximation with tie-corrected variance and continuity correction.
/// Returns 1.0 when every difference is zero.
[[nodiscard]] double wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

/// Holm step-down adjustment; output is in input order.
[[nodiscard]] std::vector<double> holm_adjust(std::span<const double> p);

/// Signed-rank p of every method against `reference`, Holm-adjusted across methods.
/// Requires at least 5 paired samples per method and equal lengths.
[[nodiscard]] std::map<std::string, double> wilcoxon_holm(
    const std::map<std::string, std::vector<double>>& scores, const std::string& reference);

}  // namespace mapdiff
