#include "doctest.h"
#include "test_util.hpp"

#include "mapdiff/errors.hpp"
#include "mapdiff/mask.hpp"
#include "mapdiff/patch.hpp"
#include "mapdiff/phantom.hpp"
#include "mapdiff/volume_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <queue>
#include <set>

using namespace mapdiff;
namespace fs = std::filesystem;

namespace {

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void put_bytes(const fs::path& p, const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

// Breadth-first flood fill over every voxel; returns the voxel set of the largest component.
std::set<std::size_t> largest_component_bfs(Dims d, const std::vector<std::uint8_t>& on) {
    std::vector<int> seen(d.count(), 0);
    std::set<std::size_t> best;
    for (int i = 0; i < d.h; ++i)
        for (int j = 0; j < d.w; ++j)
            for (int k = 0; k < d.d; ++k) {
                const auto s = d.index(i, j, k);
                if (!on[s] || seen[s]) continue;
                std::set<std::size_t> comp;
                std::queue<std::array<int, 3>> q;
                q.push({i, j, k});
                seen[s] = 1;
                while (!q.empty()) {
                    auto [a, b, c] = q.front();
                    q.pop();
                    comp.insert(d.index(a, b, c));
                    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    for (auto& o : nb) {
                        const int x = a + o[0], y = b + o[1], z = c + o[2];
                        if (x < 0 || y < 0 || z < 0 || x >= d.h || y >= d.w || z >= d.d) continue;
                        const auto n = d.index(x, y, z);
                        if (on[n] && !seen[n]) {
                            seen[n] = 1;
                            q.push({x, y, z});
                        }
                    }
                }
                if (comp.size() > best.size()) best = comp;
            }
    return best;
}

}  // namespace

TEST_SUITE("volio") {
    TEST_CASE("volume round trip of zeros is identical") {
        const auto dir = testutil::temp_dir("volio_zero");
        const Volume v = Volume::zeros({4, 4, 4}, {1.5f, 2.0f, 2.5f}, Dose::half);
        write_volume(v, dir / "z.mdv");
        const Volume r = read_volume(dir / "z.mdv");
        CHECK(r.dims() == v.dims());
        CHECK(r.spacing() == v.spacing());
        CHECK(r.dose() == Dose::half);
        CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));
    }

    TEST_CASE("phantom volume round trip is bytewise identical") {
        const auto dir = testutil::temp_dir("volio_phantom");
        PhantomSpec spec;
        spec.dims = {16, 16, 16};
        spec.seed = 3;
        const auto subject = generate_subject(spec, "p");
        write_volume(subject.at(Dose::tenth), dir / "a.mdv");
        const Volume r = read_volume(dir / "a.mdv");
        REQUIRE(r.size() == subject.at(Dose::tenth).size());
        CHECK(std::memcmp(r.data().data(), subject.at(Dose::tenth).data().data(), r.size() * sizeof(float)) == 0);
        write_volume(r, dir / "b.mdv");
        CHECK(file_bytes(dir / "a.mdv") == file_bytes(dir / "b.mdv"));
    }

    TEST_CASE("header layout matches the container definition") {
        const auto dir = testutil::temp_dir("volio_layout");
        write_volume(Volume(Dims{2, 3, 4}, std::vector<float>(24, 1.0f), {1, 1, 1}, Dose::twentieth), dir / "v.mdv");
        const auto b = file_bytes(dir / "v.mdv");
        REQUIRE(b.size() == 4 + 12 + 12 + 1 + 24 * 4);
        CHECK(std::string(b.begin(), b.begin() + 4) == "MDV1");
        std::uint32_t h = 0, w = 0, d = 0;
        std::memcpy(&h, b.data() + 4, 4);
        std::memcpy(&w, b.data() + 8, 4);
        std::memcpy(&d, b.data() + 12, 4);
        CHECK(h == 2);
        CHECK(w == 3);
        CHECK(d == 4);
        CHECK(static_cast<unsigned char>(b[28]) == 4);
    }

    TEST_CASE("random finite volumes round trip") {
        const auto dir = testutil::temp_dir("volio_prop");
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> dim(1, 16);
        for (int trial = 0; trial < 20; ++trial) {
            const Dims d{dim(rng), dim(rng), dim(rng)};
            const Volume v = testutil::random_volume(d, 100 + trial, -5.0f, 5.0f);
            write_volume(v, dir / "r.mdv");
            const Volume r = read_volume(dir / "r.mdv");
            CHECK(r.dims() == d);
            CHECK(std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)) == 0);
        }
    }

    TEST_CASE("truncated, corrupted and non-finite files are format errors") {
        const auto dir = testutil::temp_dir("volio_bad");
        write_volume(testutil::random_volume({4, 4, 4}, 1), dir / "ok.mdv");
        auto bytes = file_bytes(dir / "ok.mdv");

        auto truncated = bytes;
        truncated.resize(bytes.size() - 10);
        put_bytes(dir / "t.mdv", truncated);
        CHECK_THROWS_AS((void)read_volume(dir / "t.mdv"), FormatError);

        auto bad_magic = bytes;
        bad_magic[0] = 'X';
        put_bytes(dir / "m.mdv", bad_magic);
        CHECK_THROWS_AS((void)read_volume(dir / "m.mdv"), FormatError);

        auto trailing = bytes;
        trailing.push_back(0);
        put_bytes(dir / "x.mdv", trailing);
        CHECK_THROWS_AS((void)read_volume(dir / "x.mdv"), FormatError);

        auto nan = bytes;
        const float q = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(nan.data() + 29, &q, 4);
        put_bytes(dir / "n.mdv", nan);
        CHECK_THROWS_AS((void)read_volume(dir / "n.mdv"), FormatError);

        CHECK_THROWS_AS((void)read_volume(dir / "missing.mdv"), FormatError);
    }

    TEST_CASE("mask round trip") {
        const auto dir = testutil::temp_dir("volio_mask");
        std::vector<std::uint8_t> f(5 * 6 * 7, 0);
        for (std::size_t i = 0; i < f.size(); i += 3) f[i] = 1;
        const BodyMask m(Dims{5, 6, 7}, f);
        write_mask(m, dir / "m.mdm");
        const BodyMask r = read_mask(dir / "m.mdm");
        CHECK(r.dims() == m.dims());
        CHECK(std::equal(r.flags().begin(), r.flags().end(), m.flags().begin()));
        auto b = file_bytes(dir / "m.mdm");
        b[0] = 'Q';
        put_bytes(dir / "bad.mdm", b);
        CHECK_THROWS_AS((void)read_mask(dir / "bad.mdm"), FormatError);
    }

    TEST_CASE("uniform volume masks everything") {
        const Volume v(Dims{6, 6, 6}, std::vector<float>(216, 1.0f));
        const BodyMask m = compute_body_mask(v, 0.1);
        CHECK(m.count() == 216);
    }

    TEST_CASE("single bright cube is masked exactly") {
        const Dims d{9, 9, 9};
        std::vector<float> v(d.count(), 0.0f);
        for (int i = 3; i < 6; ++i)
            for (int j = 2; j < 5; ++j)
                for (int k = 4; k < 7; ++k) v[d.index(i, j, k)] = 2.0f;
        const BodyMask m = compute_body_mask(Volume(d, v), 0.5);
        CHECK(m.count() == 27);
        for (std::size_t i = 0; i < d.count(); ++i) CHECK(m.at(i) == (v[i] > 0.0f));
    }

    TEST_CASE("largest of two blobs wins and matches a flood-fill oracle") {
        const Dims d{10, 10, 10};
        std::vector<float> v(d.count(), 0.0f);
        for (int i = 1; i < 4; ++i)
            for (int j = 1; j < 4; ++j)
                for (int k = 1; k < 4; ++k) v[d.index(i, j, k)] = 1.0f;
        for (int i = 6; i < 8; ++i)
            for (int j = 6; j < 8; ++j)
                for (int k = 6; k < 8; ++k) v[d.index(i, j, k)] = 1.0f;
        const BodyMask m = compute_body_mask(Volume(d, v), 0.5);
        CHECK(m.count() == 27);
        std::vector<std::uint8_t> on(d.count());
        for (std::size_t i = 0; i < on.size(); ++i) on[i] = v[i] >= 0.5f;
        const auto oracle = largest_component_bfs(d, on);
        for (std::size_t i = 0; i < d.count(); ++i) CHECK(m.at(i) == (oracle.count(i) == 1));
    }

    TEST_CASE("random masks are single connected components equal to the oracle") {
        for (int trial = 0; trial < 10; ++trial) {
            const Dims d{7, 8, 9};
            const Volume v = testutil::random_volume(d, 500 + trial);
            const BodyMask m = compute_body_mask(v, 0.6);
            std::vector<std::uint8_t> on(d.count());
            const float peak = v.max();
            for (std::size_t i = 0; i < on.size(); ++i) on[i] = v.data()[i] >= 0.6f * peak;
            const auto oracle = largest_component_bfs(d, on);
            CHECK(m.count() == oracle.size());
            std::vector<std::size_t> sizes;
            (void)label_components(d, m.flags(), sizes);
            CHECK(sizes.size() == 1);
        }
    }

    TEST_CASE("all-zero volume cannot be masked") {
        CHECK_THROWS_AS((void)compute_body_mask(Volume::zeros({4, 4, 4})), ConfigError);
    }

    TEST_CASE("patch grid examples") {
        const auto g1 = make_patch_grid({8, 8, 8}, 8, 8);
        REQUIRE(g1.origins.size() == 1);
        CHECK(g1.origins[0] == Origin{0, 0, 0});

        const auto g2 = make_patch_grid({8, 8, 8}, 4, 4);
        CHECK(g2.origins.size() == 8);
        const Volume v = testutil::random_volume({8, 8, 8}, 9);
        const auto exact = stitch_volume(extract_all(v, g2), g2);
        CHECK(std::equal(exact.data().begin(), exact.data().end(), v.data().begin()));

        CHECK(axis_origins(10, 4, 3) == std::vector<int>{0, 3, 6});
        CHECK(axis_origins(10, 4, 4) == std::vector<int>{0, 4, 6});
        const auto g3 = make_patch_grid({10, 10, 10}, 4, 3);
        CHECK(g3.origins.size() == 27);
        const Volume w = testutil::random_volume({10, 10, 10}, 10, 0.5f, 2.0f);
        const auto back = stitch_volume(extract_all(w, g3), g3);
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(std::abs(back.data()[i] - w.data()[i]) <= 1e-6f * std::abs(w.data()[i]));

        CHECK_THROWS_AS((void)make_patch_grid({8, 8, 4}, 6, 2), ConfigError);
        CHECK_THROWS_AS((void)make_patch_grid({8, 8, 8}, 4, 5), ConfigError);
    }

    TEST_CASE("patch coverage and in-bounds origins for many geometries") {
        for (int dim = 4; dim <= 13; ++dim)
            for (int p = 1; p <= 4; ++p)
                for (int s = 1; s <= p; ++s) {
                    const Dims d{dim, dim + 1, dim + 2};
                    const auto g = make_patch_grid(d, p, s);
                    std::vector<int> hits(d.count(), 0);
                    for (const auto& o : g.origins) {
                        CHECK(o[0] + p <= d.h);
                        CHECK(o[1] + p <= d.w);
                        CHECK(o[2] + p <= d.d);
                        for (int i = 0; i < p; ++i)
                            for (int j = 0; j < p; ++j)
                                for (int k = 0; k < p; ++k) ++hits[d.index(o[0] + i, o[1] + j, o[2] + k)];
                    }
                    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h >= 1; }));
                    const Volume v = testutil::random_volume(d, static_cast<std::uint64_t>(dim * 100 + p * 10 + s), 1.0f, 3.0f);
                    const auto back = stitch_volume(extract_all(v, g), g);
                    double worst = 0.0;
                    for (std::size_t i = 0; i < v.size(); ++i)
                        worst = std::max(worst, std::abs(static_cast<double>(back.data()[i]) - v.data()[i]) / v.data()[i]);
                    CHECK(worst <= 1e-6);
                }
    }
}
