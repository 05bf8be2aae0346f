#include "doctest.h"

#include "mapdiff/errors.hpp"
#include "mapdiff/metrics.hpp"
#include "mapdiff/rng.hpp"
#include "mapdiff/sampler.hpp"
#include "mapdiff/trainer.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace mapdiff;

namespace {

// Treats the condition as the clean signal and returns the exact noise.
NoisePredictor oracle_predictor(const NoiseSchedule& sched) {
    return [&sched](std::span<const float> xt, std::span<const float> y, int t) {
        const double ab = sched.alpha_bar(t);
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        std::vector<float> eps(xt.size());
        for (std::size_t i = 0; i < xt.size(); ++i) eps[i] = static_cast<float>((xt[i] - a * y[i]) / b);
        return eps;
    };
}

NoisePredictor linear_predictor() {
    return [](std::span<const float> xt, std::span<const float> y, int t) {
        std::vector<float> eps(xt.size());
        for (std::size_t i = 0; i < xt.size(); ++i)
            eps[i] = 0.2f * xt[i] - 0.1f * y[i] + 1e-4f * static_cast<float>(t % 7);
        return eps;
    };
}

bool same(const Volume& a, const Volume& b) {
    return std::ranges::equal(a.data(), b.data());
}

}  // namespace

TEST_SUITE("sampler") {
    TEST_CASE("record steps must lie in [1, T]") {
        const int ok[] = {1, 500, 1000};
        CHECK_NOTHROW(validate_record_steps(ok, 1000));
        const int low[] = {0};
        CHECK_THROWS_AS(validate_record_steps(low, 1000), ConfigError);
        const int high[] = {1001};
        CHECK_THROWS_AS(validate_record_steps(high, 1000), ConfigError);
        const auto sched = linear_schedule(50);
        const std::vector<float> y(8, 0.5f);
        CHECK_THROWS_AS((void)sample_patch(linear_predictor(), y, sched, low, 1), ConfigError);
    }

    TEST_CASE("oracle noise recovers the clean volume and every intermediate") {
        const auto sched = linear_schedule();
        const auto y = testutil::random_volume({16, 16, 16}, 3, 0.5f, 4.0f);
        const auto grid = make_patch_grid(y.dims(), 8, 4);
        const std::vector<int> taus{900, 300, 40};
        const auto out = sample_volume(oracle_predictor(sched), y, grid, sched, taus, 0.25, 11);
        const auto m = BodyMask::all(y.dims());
        CHECK(nmae(out.final, y, m) < 1e-3);
        REQUIRE(out.intermediates.size() == 3);
        for (int tau : taus) {
            REQUIRE(out.intermediates.count(tau) == 1);
            CHECK(nmae(out.intermediates.at(tau), y, m) < 1e-3);
        }
    }

    TEST_CASE("intermediates are keyed by the requested taus") {
        const auto sched = linear_schedule(100);
        const std::vector<float> y(64, 0.3f);
        const std::vector<int> taus{100, 37, 1};
        const auto traj = sample_patch(linear_predictor(), y, sched, taus, 5);
        REQUIRE(traj.intermediates.size() == 3);
        for (int tau : taus) CHECK(traj.intermediates.count(tau) == 1);
        // At t = 1 the recorded estimate is the clean prediction that the last step also returns.
        CHECK(traj.intermediates.at(1).size() == 64);
        CHECK(traj.final.size() == 64);
    }

    TEST_CASE("fixed seeds are deterministic across worker counts") {
        const auto sched = linear_schedule(60);
        const auto y = testutil::random_volume({16, 16, 16}, 4, 0.0f, 2.0f);
        const auto grid = make_patch_grid(y.dims(), 8, 4);
        const std::vector<int> taus{30};
        const auto a = sample_volume(linear_predictor(), y, grid, sched, taus, 0.5, 21, 1);
        const auto b = sample_volume(linear_predictor(), y, grid, sched, taus, 0.5, 21, 1);
        const auto c = sample_volume(linear_predictor(), y, grid, sched, taus, 0.5, 21, 4);
        const auto d = sample_volume(linear_predictor(), y, grid, sched, taus, 0.5, 22, 1);
        CHECK(same(a.final, b.final));
        CHECK(same(a.final, c.final));
        CHECK(same(a.intermediates.at(30), c.intermediates.at(30)));
        CHECK_FALSE(same(a.final, d.final));
    }

    TEST_CASE("a single-patch grid equals the patch trajectory rescaled") {
        const auto sched = linear_schedule(40);
        const auto y = testutil::random_volume({8, 8, 8}, 6, 0.0f, 3.0f);
        const auto grid = make_patch_grid(y.dims(), 8, 8);
        REQUIRE(grid.origins.size() == 1);
        const double scale = 0.5;
        const std::vector<int> taus{20};
        const auto vol = sample_volume(linear_predictor(), y, grid, sched, taus, scale, 9);
        std::vector<float> y_scaled(y.data().begin(), y.data().end());
        for (float& v : y_scaled) v *= static_cast<float>(scale);
        const auto traj = sample_patch(linear_predictor(), y_scaled, sched, taus, derive_seed(9, {0, 0, 0}));
        const auto got = vol.final.data();
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(traj.final[i] / scale).epsilon(1e-6));
    }

    TEST_CASE("disjoint and overlapping grids agree where each covers a voxel once") {
        const auto sched = linear_schedule(30);
        const auto y = testutil::random_volume({16, 16, 16}, 7, 0.0f, 1.0f);
        const std::vector<int> taus;
        const auto disjoint = sample_volume(linear_predictor(), y, make_patch_grid(y.dims(), 8, 8), sched, taus, 1.0, 13);
        const auto overlap = sample_volume(linear_predictor(), y, make_patch_grid(y.dims(), 8, 4), sched, taus, 1.0, 13);
        auto single = [](int i) { return i < 4 || i >= 12; };
        int compared = 0;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j)
                for (int k = 0; k < 16; ++k) {
                    if (!(single(i) && single(j) && single(k))) continue;
                    CHECK(disjoint.final.at(i, j, k) == overlap.final.at(i, j, k));
                    ++compared;
                }
        CHECK(compared == 512);
    }

    TEST_CASE("non-finite predictions raise a numeric error") {
        const auto sched = linear_schedule(10);
        const std::vector<float> y(8, 1.0f);
        const NoisePredictor bad = [](std::span<const float> xt, std::span<const float>, int) {
            return std::vector<float>(xt.size(), std::numeric_limits<float>::quiet_NaN());
        };
        const std::vector<int> taus;
        CHECK_THROWS_AS((void)sample_patch(bad, y, sched, taus, 1), NumericError);
    }

    TEST_CASE("denoiser-backed sampling produces finite output of the input shape") {
        DenoiserConfig cfg;
        cfg.base_channels = 4;
        cfg.channel_mults = {1, 2};
        cfg.time_embed_dim = 16;
        cfg.norm_groups = 2;
        const Denoiser<float> net(cfg, 3);
        const auto sched = linear_schedule(20);
        const auto y = testutil::random_volume({8, 8, 8}, 8, 0.0f, 1.0f);
        const std::vector<int> taus{10};
        const auto out = sample_volume(net, y, make_patch_grid(y.dims(), 8, 8), sched, taus, 1.0, 4);
        CHECK(out.final.dims() == y.dims());
        for (float v : out.final.data()) CHECK(std::isfinite(v));
    }
    TEST_CASE("a denoiser trained on a constant signal samples that constant") {
        DenoiserConfig cfg;
        cfg.base_channels = 4;
        cfg.channel_mults = {1, 2};
        cfg.time_embed_dim = 16;
        cfg.norm_groups = 2;
        Denoiser<float> net(cfg, 1);
        const auto sched = linear_schedule();
        TrainConfig tc;
        tc.lambda = 0.0;
        tc.boundaries = ZoneBoundaries{{48, 32, 24}};
        Adam adam(net.params(), 1e-3);
        auto grads = net.params().zeros_like();
        std::mt19937_64 rng(3);
        std::normal_distribution<float> g;
        std::uniform_int_distribution<int> pick_t(1, 1000);
        const Dims patch{8, 8, 8};
        const std::size_t n = patch.count();
        for (int step = 0; step < 2000; ++step) {
            TrainBatch<float> b;
            b.patch = patch;
            for (int e = 0; e < 4; ++e) {
                b.x0.emplace_back(n, 0.5f);
                b.y.emplace_back(n, 0.5f);
                b.anchors.emplace_back(4, std::vector<float>(n, 0.5f));
                b.mask.emplace_back(n, 1);
                b.t.push_back(pick_t(rng));
                std::vector<float> eps(n);
                for (float& v : eps) v = g(rng);
                b.eps.push_back(std::move(eps));
            }
            grads.fill_zero();
            (void)total_loss<float, AnchorBranch::disabled>(net, b, sched, tc, &grads);
            adam.step(net.params(), grads);
        }
        const std::vector<float> y(n, 0.5f);
        const std::vector<int> taus;
        const auto traj = sample_patch(denoiser_predictor(net, patch, 1000), y, sched, taus, 10);
        double mean = 0.0;
        for (float v : traj.final) mean += v;
        mean /= static_cast<double>(n);
        CHECK(std::abs(mean - 0.5) < 0.05);
    }
}
