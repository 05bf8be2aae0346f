#include "mapdiff/metrics.hpp"

#include "mapdiff/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mapdiff {

namespace {

void check_pair(const Volume& a, const Volume& ref, const BodyMask& m) {
    if (a.dims() != ref.dims() || m.dims() != ref.dims())
        throw ConfigError("metric inputs have mismatched dims");
}

double masked_max(const Volume& ref, const BodyMask& m) {
    double peak = -std::numeric_limits<double>::infinity();
    const auto r = ref.data();
    for (std::size_t i = 0; i < r.size(); ++i)
        if (m.at(i)) peak = std::max(peak, static_cast<double>(r[i]));
    return peak;
}

// Summed-area table with a zero guard plane on the low side of every axis.
class Integral {
public:
    explicit Integral(Dims dims) : dims_(dims), table_(static_cast<std::size_t>(dims.h + 1) * (dims.w + 1) * (dims.d + 1), 0.0) {}

    template <typename F>
    void build(F&& value) {
        for (int i = 0; i < dims_.h; ++i)
            for (int j = 0; j < dims_.w; ++j)
                for (int k = 0; k < dims_.d; ++k)
                    at(i + 1, j + 1, k + 1) = value(dims_.index(i, j, k)) + at(i, j + 1, k + 1) +
                                              at(i + 1, j, k + 1) + at(i + 1, j + 1, k) -
                                              at(i, j, k + 1) - at(i, j + 1, k) - at(i + 1, j, k) +
                                              at(i, j, k);
    }

    // Sum over the half-open box [lo, hi).
    [[nodiscard]] double box(const std::array<int, 3>& lo, const std::array<int, 3>& hi) const {
        return at(hi[0], hi[1], hi[2]) - at(lo[0], hi[1], hi[2]) - at(hi[0], lo[1], hi[2]) -
               at(hi[0], hi[1], lo[2]) + at(lo[0], lo[1], hi[2]) + at(lo[0], hi[1], lo[2]) +
               at(hi[0], lo[1], lo[2]) - at(lo[0], lo[1], lo[2]);
    }

private:
    [[nodiscard]] double& at(int i, int j, int k) {
        return table_[(static_cast<std::size_t>(i) * (dims_.w + 1) + j) * (dims_.d + 1) + k];
    }
    [[nodiscard]] double at(int i, int j, int k) const {
        return table_[(static_cast<std::size_t>(i) * (dims_.w + 1) + j) * (dims_.d + 1) + k];
    }

    Dims dims_;
    std::vector<double> table_;
};

}  // namespace

double Signature::distance(const Signature& other) const {
    return std::hypot(nmae_component - other.nmae_component, ssim_complement - other.ssim_complement);
}

double nmae(const Volume& a, const Volume& ref, const BodyMask& m) {
    check_pair(a, ref, m);
    const auto x = a.data();
    const auto r = ref.data();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!m.at(i)) continue;
        num += std::abs(static_cast<double>(x[i]) - r[i]);
        den += std::abs(static_cast<double>(r[i]));
    }
    if (!(den > 0.0)) throw NumericError("NMAE undefined: masked reference sum is zero");
    return num / den;
}

double psnr(const Volume& a, const Volume& ref, const BodyMask& m) {
    check_pair(a, ref, m);
    const double peak = masked_max(ref, m);
    if (!(peak > 0.0)) throw NumericError("PSNR undefined: masked reference maximum is not positive");
    const auto x = a.data();
    const auto r = ref.data();
    double se = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!m.at(i)) continue;
        const double e = static_cast<double>(x[i]) - r[i];
        se += e * e;
    }
    const double mse = se / static_cast<double>(m.count());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Volume& a, const Volume& ref, const BodyMask& m) {
    check_pair(a, ref, m);
    const Dims dims = ref.dims();
    if (dims.min_extent() < kSsimWindow) throw ConfigError("volume smaller than the SSIM window");
    const double range = masked_max(ref, m);
    if (!(range > 0.0)) throw NumericError("SSIM undefined: masked reference maximum is not positive");
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    const auto x = a.data();
    const auto y = ref.data();
    Integral sx(dims), sy(dims), sxx(dims), syy(dims), sxy(dims);
    sx.build([&](std::size_t i) { return static_cast<double>(x[i]); });
    sy.build([&](std::size_t i) { return static_cast<double>(y[i]); });
    sxx.build([&](std::size_t i) { return static_cast<double>(x[i]) * x[i]; });
    syy.build([&](std::size_t i) { return static_cast<double>(y[i]) * y[i]; });
    sxy.build([&](std::size_t i) { return static_cast<double>(x[i]) * y[i]; });

    constexpr int half = kSsimWindow / 2;
    double total = 0.0;
    for (int i = 0; i < dims.h; ++i)
        for (int j = 0; j < dims.w; ++j)
            for (int k = 0; k < dims.d; ++k) {
                if (!m.at(i, j, k)) continue;
                const std::array<int, 3> lo{std::max(i - half, 0), std::max(j - half, 0), std::max(k - half, 0)};
                const std::array<int, 3> hi{std::min(i + half + 1, dims.h), std::min(j + half + 1, dims.w),
                                            std::min(k + half + 1, dims.d)};
                const double n = static_cast<double>(hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
                const double mx = sx.box(lo, hi) / n;
                const double my = sy.box(lo, hi) / n;
                const double vx = sxx.box(lo, hi) / n - mx * mx;
                const double vy = syy.box(lo, hi) / n - my * my;
                const double cov = sxy.box(lo, hi) / n - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
    return total / static_cast<double>(m.count());
}

Signature signature(const Volume& a, const Volume& ref, const BodyMask& m) {
    return Signature{nmae(a, ref, m), 1.0 - ssim(a, ref, m)};
}

MetricReport evaluate_metrics(const Volume& a, const Volume& ref, const BodyMask& m) {
    return MetricReport{psnr(a, ref, m), ssim(a, ref, m), nmae(a, ref, m), m.count()};
}

}  // namespace mapdiff
