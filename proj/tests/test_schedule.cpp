#include "doctest.h"

#include "mapdiff/errors.hpp"
#include "mapdiff/rng.hpp"
#include "mapdiff/schedule.hpp"

#include <cmath>
#include <random>

using namespace mapdiff;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

}  // namespace

TEST_SUITE("schedule") {
    TEST_CASE("linear schedule endpoints and products") {
        const auto s = linear_schedule(1000, 1e-4, 2e-2);
        CHECK(s.steps() == 1000);
        CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(s.beta(1000) == doctest::Approx(2e-2).epsilon(1e-12));
        CHECK(s.alpha_bar(0) == 1.0);
        CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
        CHECK(s.alpha_bar(1000) < 1e-4);
        double prod = 1.0;
        for (int t = 1; t <= 1000; ++t) {
            prod *= 1.0 - (1e-4 + (2e-2 - 1e-4) * (t - 1) / 999.0);
            CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
        }
    }

    TEST_CASE("schedule invariants") {
        const auto s = linear_schedule();
        for (int t = 1; t <= s.steps(); ++t) {
            CHECK(s.beta(t) > 0.0);
            CHECK(s.beta(t) < 1.0);
            if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
            CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
            CHECK(s.alpha_bar(t) > 0.0);
            CHECK(s.alpha_bar_prev(t) == s.alpha_bar(t - 1));
            CHECK(s.posterior_variance(t) <= s.beta(t));
        }
        CHECK(s.posterior_variance(1) == 0.0);
    }

    TEST_CASE("invalid schedules are rejected") {
        CHECK_THROWS_AS((void)linear_schedule(1, 1e-4, 2e-2), ConfigError);
        CHECK_THROWS_AS((void)linear_schedule(100, 0.0, 2e-2), ConfigError);
        CHECK_THROWS_AS((void)linear_schedule(100, 3e-2, 2e-2), ConfigError);
        CHECK_THROWS_AS((void)linear_schedule(100, 1e-4, 1.0), ConfigError);
        const auto s = linear_schedule(10);
        CHECK_THROWS_AS((void)s.beta(0), ConfigError);
        CHECK_THROWS_AS((void)s.alpha_bar(11), ConfigError);
    }

    TEST_CASE("forward sample closed forms") {
        const auto s = linear_schedule();
        const auto x0 = gaussian(64, 1);
        const auto eps = gaussian(64, 2);
        const std::vector<double> zeros(64, 0.0);
        for (int t : {1, 250, 1000}) {
            const auto a = forward_sample<double>(x0, t, zeros, s);
            const auto b = forward_sample<double>(zeros, t, eps, s);
            for (std::size_t i = 0; i < 64; ++i) {
                CHECK(a[i] == doctest::Approx(std::sqrt(s.alpha_bar(t)) * x0[i]));
                CHECK(b[i] == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t)) * eps[i]));
            }
        }
        CHECK_THROWS_AS((void)forward_sample<double>(x0, 0, eps, s), ConfigError);
        CHECK_THROWS_AS((void)forward_sample<double>(x0, 1001, eps, s), ConfigError);
    }

    TEST_CASE("forward marginal has unit second moment for unit inputs") {
        const auto s = linear_schedule();
        const std::size_t n = 10000;
        const auto x0 = gaussian(n, 3);
        const auto eps = gaussian(n, 4);
        for (int t : {10, 500, 990}) {
            const auto xt = forward_sample<double>(x0, t, eps, s);
            double m2 = 0.0;
            for (double v : xt) m2 += v * v;
            m2 /= static_cast<double>(n);
            // Var(x^2) = 2 for a unit Gaussian.
            CHECK(std::abs(m2 - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
        }
    }

    TEST_CASE("predict_x0 inverts forward_sample") {
        const auto s = linear_schedule();
        const auto x0 = gaussian(512, 5);
        const auto eps = gaussian(512, 6);
        std::vector<float> x0f(x0.begin(), x0.end()), epsf(eps.begin(), eps.end());
        for (int t : {1, 10, 100, 500, 999, 1000}) {
            const auto xt = forward_sample<double>(x0, t, eps, s);
            const auto back = predict_x0<double>(xt, t, eps, s);
            for (std::size_t i = 0; i < x0.size(); ++i) CHECK(std::abs(back[i] - x0[i]) <= 1e-9 * (1.0 + std::abs(x0[i])));
            const auto again = forward_sample<double>(back, t, eps, s);
            for (std::size_t i = 0; i < xt.size(); ++i) CHECK(again[i] == doctest::Approx(xt[i]).epsilon(1e-9));
        }
        for (int t : {1, 100, 500}) {
            const auto xt = forward_sample<float>(x0f, t, epsf, s);
            const auto back = predict_x0<float>(xt, t, epsf, s);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < x0f.size(); ++i) {
                num += std::abs(static_cast<double>(back[i]) - x0f[i]);
                den += std::abs(static_cast<double>(x0f[i]));
            }
            CHECK(num / den < 1e-5);
        }
        const std::vector<double> zeros(512, 0.0);
        const auto xt = gaussian(512, 7);
        const auto direct = predict_x0<double>(xt, 300, zeros, s);
        for (std::size_t i = 0; i < xt.size(); ++i)
            CHECK(direct[i] == doctest::Approx(xt[i] / std::sqrt(s.alpha_bar(300))));
    }

    TEST_CASE("reverse step at t = 1 recovers x0 and rejects noise") {
        const auto s = linear_schedule();
        const auto x0 = gaussian(32, 8);
        const auto eps = gaussian(32, 9);
        const std::vector<double> zeros(32, 0.0);
        const auto x1 = forward_sample<double>(x0, 1, eps, s);
        std::vector<double> out(32);
        reverse_step<double>(x1, 1, eps, zeros, s, out);
        for (std::size_t i = 0; i < 32; ++i) CHECK(out[i] == doctest::Approx(x0[i]).epsilon(1e-9));
        CHECK_THROWS_AS(reverse_step<double>(x1, 1, eps, eps, s, out), ConfigError);
    }

    TEST_CASE("oracle reverse pass reproduces x0 and contracts toward it") {
        const auto s = linear_schedule();
        const std::size_t n = 8 * 8 * 8;
        std::vector<double> x0 = gaussian(n, 10);
        for (double& v : x0) v = 1.0 + 0.3 * v;
        Rng rng(11);
        std::normal_distribution<double> g;
        std::vector<double> x(n), z(n), next(n), eps(n);
        for (double& v : x) v = g(rng);
        auto nmae_to_x0 = [&](const std::vector<double>& v) {
            double num = 0, den = 0;
            for (std::size_t i = 0; i < n; ++i) {
                num += std::abs(v[i] - x0[i]);
                den += std::abs(x0[i]);
            }
            return num / den;
        };
        const double start = nmae_to_x0(x);
        for (int t = s.steps(); t >= 1; --t) {
            const double ab = s.alpha_bar(t);
            for (std::size_t i = 0; i < n; ++i) eps[i] = (x[i] - std::sqrt(ab) * x0[i]) / std::sqrt(1.0 - ab);
            for (double& v : z) v = t > 1 ? g(rng) : 0.0;
            reverse_step<double>(x, t, eps, z, s, next);
            std::swap(x, next);
        }
        CHECK(nmae_to_x0(x) < 1e-3);
        CHECK(nmae_to_x0(x) < start);
    }

    TEST_CASE("weight schedule") {
        const WeightSchedule poly{WeightKind::poly, 2.0, 1.0};
        CHECK(poly(0, 1000) == 1.0);
        CHECK(poly(1000, 1000) == 0.0);
        CHECK(poly(500, 1000) == doctest::Approx(0.25));
        for (double p : {0.5, 1.0, 2.0, 3.7}) {
            const WeightSchedule w{WeightKind::poly, p, 1.0};
            CHECK(w(0, 100) == 1.0);
            for (int t = 1; t <= 100; ++t) {
                CHECK(w(t, 100) < w(t - 1, 100));
                CHECK(w(t, 100) >= 0.0);
            }
        }
        const WeightSchedule c{WeightKind::constant, 2.0, 0.7};
        for (int t = 0; t <= 100; ++t) CHECK(c(t, 100) == 0.7);
        CHECK(parse_weight_kind("poly") == WeightKind::poly);
        CHECK(parse_weight_kind(weight_kind_name(WeightKind::constant)) == WeightKind::constant);
        CHECK_THROWS_AS((void)parse_weight_kind("cosine"), ConfigError);
        CHECK_THROWS_AS((void)poly(1001, 1000), ConfigError);
    }

    TEST_CASE("derived seeds are order sensitive and stable") {
        CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
        CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
        CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    }
}
