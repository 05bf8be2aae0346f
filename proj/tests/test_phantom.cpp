#include "doctest.h"
#include "test_util.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/metrics.hpp"
#include "mapdiff/phantom.hpp"

#include <cmath>
#include <cstring>

using namespace mapdiff;

namespace {

bool bitwise_equal(const Volume& a, const Volume& b) {
    return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_SUITE("phantom") {
    TEST_CASE("degenerate spec gives a uniform ellipsoid whose support is the mask") {
        PhantomSpec spec;
        spec.dims = {20, 20, 20};
        spec.n_ellipsoids = 0;
        spec.n_lesions = 0;
        spec.seed = 5;
        const auto gt = generate_ground_truth(spec);
        for (std::size_t i = 0; i < gt.activity.size(); ++i) {
            const float v = gt.activity.data()[i];
            CHECK((v == 0.0f || v == static_cast<float>(spec.background_activity)));
            CHECK(gt.mask.at(i) == (v > 0.0f));
        }
    }

    TEST_CASE("identical seeds give bitwise identical subjects") {
        PhantomSpec spec;
        spec.dims = {16, 16, 16};
        spec.seed = 99;
        const auto a = generate_subject(spec, "a");
        const auto b = generate_subject(spec, "a");
        for (Dose d : kDoseLadder) CHECK(bitwise_equal(a.at(d), b.at(d)));
        CHECK(bitwise_equal(a.ground_truth, b.ground_truth));
        spec.seed = 100;
        const auto c = generate_subject(spec, "c");
        CHECK_FALSE(bitwise_equal(a.ground_truth, c.ground_truth));
    }

    TEST_CASE("a lesion at 5x background sets the peak") {
        PhantomSpec spec;
        spec.dims = {24, 24, 24};
        spec.n_lesions = 1;
        spec.lesion_activity = 5.0;
        spec.seed = 8;
        const auto gt = generate_ground_truth(spec);
        CHECK(gt.activity.max() / spec.background_activity == doctest::Approx(5.0).epsilon(1e-6));
    }

    TEST_CASE("simulate_dose edge cases") {
        const Volume zero = Volume::zeros({8, 8, 8});
        for (double f : {0.05, 0.5, 1.0}) {
            const auto out = simulate_dose(zero, f, 300.0, 1);
            CHECK(out.max() == 0.0f);
        }
        CHECK_THROWS_AS((void)simulate_dose(zero, 0.0, 300.0, 1), ConfigError);
        CHECK_THROWS_AS((void)simulate_dose(zero, -0.1, 300.0, 1), ConfigError);
        CHECK_THROWS_AS((void)simulate_dose(zero, 1.5, 300.0, 1), ConfigError);
    }

    TEST_CASE("very high counts reproduce the ground truth within 1%") {
        PhantomSpec spec;
        spec.dims = {16, 16, 16};
        spec.seed = 2;
        const auto gt = generate_ground_truth(spec);
        const auto out = simulate_dose(gt.activity, 1.0, 1e6, 77);
        std::size_t checked = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const float g = gt.activity.data()[i];
            if (g <= 0.0f) continue;
            CHECK(std::abs(out.data()[i] - g) / g < 0.01);
            ++checked;
        }
        CHECK(checked >= 1000);
    }

    TEST_CASE("simulate_dose is unbiased") {
        const Dims d{8, 8, 8};
        const Volume gt(d, std::vector<float>(d.count(), 2.0f));
        const double f = 0.1, count_scale = 50.0;
        const int reps = 400;
        std::vector<double> sum(d.count(), 0.0);
        for (int r = 0; r < reps; ++r) {
            const auto v = simulate_dose(gt, f, count_scale, 1000 + static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v.data()[i];
        }
        // Var of one draw = gt / (f * count_scale); mean over all voxels and reps.
        double grand = 0.0;
        for (double s : sum) grand += s;
        grand /= static_cast<double>(reps * d.count());
        const double sigma = std::sqrt(2.0 / (f * count_scale) / static_cast<double>(reps * d.count()));
        CHECK(std::abs(grand - 2.0) < 3.0 * sigma);
        const double per_voxel_sigma = std::sqrt(2.0 / (f * count_scale) / reps);
        int outside = 0;
        for (double s : sum)
            if (std::abs(s / reps - 2.0) > 3.0 * per_voxel_sigma) ++outside;
        CHECK(outside < static_cast<int>(0.01 * d.count()) + 3);
    }

    TEST_CASE("subjects hold five independent dose levels with monotone degradation") {
        PhantomSpec spec;
        spec.dims = {24, 24, 24};
        std::map<Dose, double> nmae_sum, ssim_sum;
        const int n = 5;
        for (int s = 0; s < n; ++s) {
            spec.seed = 40 + static_cast<std::uint64_t>(s);
            const auto subject = generate_subject(spec, "s");
            CHECK(subject.volumes.size() == 5);
            for (Dose d : kDoseLadder) {
                CHECK(subject.volumes.count(d) == 1);
                CHECK(subject.at(d).dims() == spec.dims);
                CHECK(subject.at(d).dose() == d);
            }
            CHECK_FALSE(bitwise_equal(subject.at(Dose::half), subject.at(Dose::quarter)));
            const double low = nmae(subject.at(Dose::twentieth), subject.ground_truth, subject.mask);
            const double high = nmae(subject.at(Dose::half), subject.ground_truth, subject.mask);
            CHECK(low > high);
            for (Dose d : {Dose::twentieth, Dose::tenth, Dose::quarter, Dose::half}) {
                const auto sig = signature(subject.at(d), subject.full(), subject.mask);
                nmae_sum[d] += sig.nmae_component;
                ssim_sum[d] += sig.ssim_complement;
            }
            const double full_vs_truth = nmae(subject.full(), subject.ground_truth, subject.mask);
            CHECK(full_vs_truth > 0.02);
            CHECK(full_vs_truth < 0.05);
        }
        const Dose order[] = {Dose::twentieth, Dose::tenth, Dose::quarter, Dose::half};
        for (int j = 0; j + 1 < 4; ++j) {
            CHECK(nmae_sum[order[j]] > nmae_sum[order[j + 1]]);
            CHECK(ssim_sum[order[j]] > ssim_sum[order[j + 1]]);
        }
    }

    TEST_CASE("spec validation") {
        PhantomSpec spec;
        spec.lesion_activity = 0.5;
        CHECK_THROWS_AS(spec.validate(), ConfigError);
        spec = PhantomSpec{};
        spec.count_scale = 0.0;
        CHECK_THROWS_AS(spec.validate(), ConfigError);
        spec = PhantomSpec{};
        spec.dims = {4, 16, 16};
        CHECK_THROWS_AS(spec.validate(), ConfigError);
    }
}
