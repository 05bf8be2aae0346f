#pragma once

#include "mapdiff/mask.hpp"
#include "mapdiff/volume.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

// Literal re-implementations used as references; deliberately naive.
namespace oracle {

inline double nmae(const mapdiff::Volume& a, const mapdiff::Volume& r, const mapdiff::BodyMask& m) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (m.at(i)) {
            num += std::fabs(static_cast<double>(a.data()[i]) - static_cast<double>(r.data()[i]));
            den += std::fabs(static_cast<double>(r.data()[i]));
        }
    return num / den;
}

inline double psnr(const mapdiff::Volume& a, const mapdiff::Volume& r, const mapdiff::BodyMask& m) {
    double peak = -1e300, se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (m.at(i)) {
            peak = std::max(peak, static_cast<double>(r.data()[i]));
            const double e = static_cast<double>(a.data()[i]) - static_cast<double>(r.data()[i]);
            se += e * e;
            ++n;
        }
    const double mse = se / static_cast<double>(n);
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

// Two-pass window statistics over the clipped 7^3 neighbourhood of every masked voxel.
inline double ssim(const mapdiff::Volume& a, const mapdiff::Volume& r, const mapdiff::BodyMask& m) {
    const auto d = r.dims();
    double peak = -1e300;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (m.at(i)) peak = std::max(peak, static_cast<double>(r.data()[i]));
    const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
    double total = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < d.h; ++i)
        for (int j = 0; j < d.w; ++j)
            for (int k = 0; k < d.d; ++k) {
                if (!m.at(i, j, k)) continue;
                std::vector<double> xs, ys;
                for (int u = i - 3; u <= i + 3; ++u)
                    for (int v = j - 3; v <= j + 3; ++v)
                        for (int w = k - 3; w <= k + 3; ++w) {
                            if (u < 0 || v < 0 || w < 0 || u >= d.h || v >= d.w || w >= d.d) continue;
                            xs.push_back(a.at(u, v, w));
                            ys.push_back(r.at(u, v, w));
                        }
                const double n = static_cast<double>(xs.size());
                double mx = 0, my = 0;
                for (std::size_t q = 0; q < xs.size(); ++q) {
                    mx += xs[q];
                    my += ys[q];
                }
                mx /= n;
                my /= n;
                double vx = 0, vy = 0, cv = 0;
                for (std::size_t q = 0; q < xs.size(); ++q) {
                    vx += (xs[q] - mx) * (xs[q] - mx);
                    vy += (ys[q] - my) * (ys[q] - my);
                    cv += (xs[q] - mx) * (ys[q] - my);
                }
                vx /= n;
                vy /= n;
                cv /= n;
                total += ((2 * mx * my + c1) * (2 * cv + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

// Two-sided signed-rank p by enumerating all 2^n sign patterns of the midranked |d|.
inline double wilcoxon_enumerate(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
    const std::size_t n = d.size();
    if (n == 0) return 1.0;
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::fabs(d[j]) < std::fabs(d[i])) ++less;
            if (std::fabs(d[j]) == std::fabs(d[i])) ++equal;
        }
        rank[i] = less + (equal + 1.0) / 2.0;
    }
    double total = 0, w_obs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += rank[i];
        if (d[i] > 0) w_obs += rank[i];
    }
    const double dev_obs = std::fabs(w_obs - total / 2.0);
    std::size_t extreme = 0;
    const std::size_t patterns = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        double w = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) w += rank[i];
        if (std::fabs(w - total / 2.0) >= dev_obs - 1e-9) ++extreme;
    }
    return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
}

}  // namespace oracle
